"""Classical test functions with shift/rotation instances and known optima.

Every base function is written so its global optimum sits at the origin with
value 0; an instance moves it to ``x_shift`` and lifts the objective by
``y_shift``. All functions accept a 2-D array of shape ``(n, D)`` and return
``n`` objective values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ._seeding import rng_for


def _dim_weights(D: int, exponent: float) -> np.ndarray:
    if D == 1:
        return np.ones(1)
    return exponent ** (np.arange(D) / (D - 1))


def sphere(z):
    return np.sum(z**2, axis=1)


def ellipsoid(z):
    return np.sum(_dim_weights(z.shape[1], 1e6) * z**2, axis=1)


def rosenbrock(z):
    u = z + 1.0
    if u.shape[1] == 1:
        return (u[:, 0] - 1.0) ** 2
    return np.sum(100.0 * (u[:, 1:] - u[:, :-1] ** 2) ** 2 + (u[:, :-1] - 1.0) ** 2, axis=1)


def rastrigin(z):
    return 10.0 * z.shape[1] + np.sum(z**2 - 10.0 * np.cos(2.0 * np.pi * z), axis=1)


def ackley(z):
    a = -20.0 * np.exp(-0.2 * np.sqrt(np.mean(z**2, axis=1)))
    b = -np.exp(np.mean(np.cos(2.0 * np.pi * z), axis=1))
    return a + b + 20.0 + math.e


def griewank(z):
    idx = np.sqrt(np.arange(1, z.shape[1] + 1))
    return 1.0 + np.sum(z**2, axis=1) / 4000.0 - np.prod(np.cos(z / idx), axis=1)


def schwefel_2_21(z):
    return np.max(np.abs(z), axis=1)


def different_powers(z):
    D = z.shape[1]
    exps = 2.0 + (4.0 * np.arange(D) / (D - 1) if D > 1 else np.zeros(1))
    return np.sum(np.abs(z) ** exps, axis=1)


def linear_slope(z):
    # one-sided slope saturating at the optimum: flat wherever z_i >= 0
    return np.sum(_dim_weights(z.shape[1], 10.0) * np.maximum(0.0, -z), axis=1)


def schaffer_f7(z):
    if z.shape[1] == 1:
        s = np.abs(z)
    else:
        s = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    rs = np.sqrt(s)
    return np.mean(rs + rs * np.sin(50.0 * s**0.2) ** 2, axis=1) ** 2


_WEI_K = np.arange(21)
_WEI_A = 0.5**_WEI_K
_WEI_B = 3.0**_WEI_K
_WEI_OFFSET = float(np.sum(_WEI_A * np.cos(np.pi * _WEI_B)))


def weierstrass(z):
    terms = _WEI_A * np.cos(2.0 * np.pi * _WEI_B * (z[..., None] + 0.5))
    return np.sum(terms, axis=(1, 2)) - z.shape[1] * _WEI_OFFSET


def bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


BASE_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "rosenbrock": rosenbrock,
    "rastrigin": rastrigin,
    "ackley": ackley,
    "griewank": griewank,
    "schwefel_2_21": schwefel_2_21,
    "different_powers": different_powers,
    "linear_slope": linear_slope,
    "schaffer_f7": schaffer_f7,
    "weierstrass": weierstrass,
    "bent_cigar": bent_cigar,
}

# name -> instance ids
SUITES: dict[str, tuple[int, ...]] = {
    "classic12-single": (1,),
    "classic12-multi5": (1, 2, 3, 4, 5),
}


@dataclass(frozen=True, eq=False)
class ProblemClass:
    class_id: int
    name: str
    dimension: int
    lower: np.ndarray
    upper: np.ndarray
    base_optimum_location: np.ndarray
    base_optimum_value: float = 0.0
    rotated: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        for arr in (self.lower, self.upper, self.base_optimum_location):
            if np.shape(arr) != (self.dimension,):
                raise ValueError(f"{self.name}: vector fields must have length {self.dimension}")
        if np.any(self.lower >= self.upper):
            raise ValueError(f"{self.name}: domain bounds must satisfy lower < upper")

    @property
    def function(self) -> Callable[[np.ndarray], np.ndarray]:
        return BASE_FUNCTIONS[self.name]

    @property
    def domain_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper


@dataclass(eq=False)
class ProblemInstance:
    problem: ProblemClass
    instance_id: int
    x_shift: np.ndarray
    y_shift: float
    rotation: np.ndarray | None = None
    evaluation_counter: int = field(default=0)

    @property
    def class_id(self) -> int:
        return self.problem.class_id

    @property
    def dimension(self) -> int:
        return self.problem.dimension

    @property
    def lower(self) -> np.ndarray:
        return self.problem.lower

    @property
    def upper(self) -> np.ndarray:
        return self.problem.upper

    @property
    def optimum_value(self) -> float:
        return self.problem.base_optimum_value + self.y_shift

    @property
    def optimum_location(self) -> np.ndarray:
        base = self.problem.base_optimum_location
        if self.rotation is not None:
            base = self.rotation.T @ base
        return self.x_shift + base

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = X - self.x_shift
        if self.rotation is not None:
            Z = Z @ self.rotation.T
        return Z


def make_class(class_id: int, name: str, dimension: int = 10, bound: float = 5.0,
               rotated: bool = False) -> ProblemClass:
    if name not in BASE_FUNCTIONS:
        raise ValueError(f"unknown base function {name!r}")
    return ProblemClass(
        class_id=class_id,
        name=name,
        dimension=dimension,
        lower=np.full(dimension, -bound),
        upper=np.full(dimension, bound),
        base_optimum_location=np.zeros(dimension),
        base_optimum_value=0.0,
        rotated=rotated,
    )


def _random_rotation(D: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((D, D)))
    return Q * np.sign(np.diag(R))


def make_instance(problem: ProblemClass, instance_id: int, seed: int = 0) -> ProblemInstance:
    """Build instance ``instance_id`` of ``problem``.

    Instance 0 is the untransformed base function. Higher ids draw a shift
    from the central half of the domain, an objective offset in [-100, 100],
    and (for rotated classes) a random orthogonal matrix. The draw depends
    only on ``(seed, class_id, instance_id)``.
    """
    if instance_id < 0:
        raise ValueError("instance_id must be non-negative")
    D = problem.dimension
    if instance_id == 0:
        return ProblemInstance(problem, 0, np.zeros(D), 0.0, None)
    rng = rng_for(seed, problem.class_id, instance_id)
    width = problem.upper - problem.lower
    x_shift = rng.uniform(problem.lower + 0.25 * width, problem.upper - 0.25 * width)
    y_shift = float(rng.uniform(-100.0, 100.0))
    rotation = _random_rotation(D, rng) if problem.rotated else None
    inst = ProblemInstance(problem, instance_id, x_shift, y_shift, rotation)
    opt = inst.optimum_location
    if np.any(opt < problem.lower) or np.any(opt > problem.upper):
        raise ValueError(f"{problem.name} instance {instance_id}: optimum leaves the domain")
    return inst


def _check_points(instance: ProblemInstance, X: np.ndarray) -> None:
    if X.shape[-1] != instance.dimension:
        raise ValueError(f"expected dimension {instance.dimension}, got {X.shape[-1]}")
    if np.any(X < instance.lower) or np.any(X > instance.upper):
        raise ValueError("point outside the domain bounds")


def evaluate(instance: ProblemInstance, x) -> float:
    """Objective value of one point; counts as one evaluation."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("evaluate expects a single vector")
    _check_points(instance, x)
    value = instance.problem.function(instance.transform(x[None, :]))[0]
    instance.evaluation_counter += 1
    return float(value + instance.y_shift)


def evaluate_batch(instance: ProblemInstance, X) -> np.ndarray:
    """Objective values of the rows of ``X``; counts ``len(X)`` evaluations."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("evaluate_batch expects a 2-D array")
    _check_points(instance, X)
    values = instance.problem.function(instance.transform(X)) + instance.y_shift
    instance.evaluation_counter += X.shape[0]
    return values


def precision(instance: ProblemInstance, f_value: float) -> float:
    return max(0.0, float(f_value) - instance.optimum_value)


def suite_catalog(suite_name: str, dimension: int = 10,
                  rotated_classes: Iterable[int] = ()) -> list[ProblemClass]:
    if suite_name not in SUITES:
        raise ValueError(f"unknown suite {suite_name!r}; choose from {sorted(SUITES)}")
    rotated = set(rotated_classes)
    return [make_class(i, name, dimension, rotated=i in rotated)
            for i, name in enumerate(BASE_FUNCTIONS, start=1)]


def suite_instances(suite_name: str, dimension: int = 10, seed: int = 0,
                    rotated_classes: Iterable[int] = ()) -> list[ProblemInstance]:
    classes = suite_catalog(suite_name, dimension, rotated_classes)
    return [make_instance(c, i, seed) for c in classes for i in SUITES[suite_name]]


def write_suite_csv(handle, suite_name: str, instances: Sequence[ProblemInstance]) -> None:
    D = instances[0].dimension if instances else 0
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["suite", "class_id", "name", "dimension", "instance_id"]
                    + [f"xshift_{j}" for j in range(D)] + ["yshift"])
    for inst in instances:
        writer.writerow([suite_name, inst.class_id, inst.problem.name, inst.dimension,
                         inst.instance_id] + [repr(float(v)) for v in inst.x_shift]
                        + [repr(inst.y_shift)])
