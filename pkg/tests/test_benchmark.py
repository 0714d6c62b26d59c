import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfclust.benchmark import (
    BASE_FUNCTIONS,
    SUITES,
    evaluate,
    evaluate_batch,
    make_class,
    make_instance,
    precision,
    suite_catalog,
    suite_instances,
    write_suite_csv,
)


@pytest.mark.parametrize("name", list(BASE_FUNCTIONS))
def test_base_optimum_at_origin(name):
    for D in (1, 2, 10):
        cls = make_class(1, name, D)
        value = cls.function(cls.base_optimum_location[None, :])[0]
        assert abs(value - cls.base_optimum_value) < 1e-9


@pytest.mark.parametrize("name", list(BASE_FUNCTIONS))
def test_origin_is_global_minimum_on_random_points(name):
    cls = make_class(1, name, 5)
    X = np.random.default_rng(0).uniform(cls.lower, cls.upper, size=(2000, 5))
    assert np.all(cls.function(X) >= -1e-9)


def test_sphere_examples():
    inst = make_instance(make_class(1, "sphere"), 0)
    assert evaluate(inst, np.zeros(10)) == 0.0
    assert evaluate(inst, np.eye(10)[0]) == 1.0
    assert inst.evaluation_counter == 2


def test_rastrigin_shift_maps_optimum():
    inst = make_instance(make_class(4, "rastrigin"), 3, seed=1)
    assert evaluate(inst, inst.x_shift) == pytest.approx(inst.y_shift, abs=1e-9)


def test_instance_zero_is_identity():
    inst = make_instance(make_class(2, "ellipsoid", rotated=True), 0)
    assert np.all(inst.x_shift == 0) and inst.y_shift == 0 and inst.rotation is None


def test_rotation_orthogonal_and_optimum_preserved():
    cls = make_class(5, "ackley", 6, rotated=True)
    for i in range(1, 6):
        inst = make_instance(cls, i, seed=4)
        R = inst.rotation
        assert np.allclose(R @ R.T, np.eye(6), atol=1e-9)
        assert precision(inst, evaluate(inst, inst.optimum_location)) < 1e-9
        assert np.all(inst.optimum_location >= cls.lower) and np.all(inst.optimum_location <= cls.upper)


def test_instances_are_keyed_by_seed_class_and_id():
    cls = make_class(3, "rosenbrock")
    a, b = make_instance(cls, 2, seed=9), make_instance(cls, 2, seed=9)
    c = make_instance(cls, 3, seed=9)
    assert np.array_equal(a.x_shift, b.x_shift) and a.y_shift == b.y_shift
    assert not np.array_equal(a.x_shift, c.x_shift)


def test_evaluate_errors():
    inst = make_instance(make_class(1, "sphere", 3), 1)
    with pytest.raises(ValueError, match="dimension"):
        evaluate(inst, np.zeros(4))
    with pytest.raises(ValueError, match="outside"):
        evaluate(inst, np.array([0.0, 0.0, 6.0]))
    with pytest.raises(ValueError):
        make_instance(make_class(1, "sphere", 3), -1)


def test_evaluate_batch_counts_and_matches_single():
    inst = make_instance(make_class(11, "weierstrass", 4), 2)
    X = np.random.default_rng(1).uniform(-5, 5, size=(7, 4))
    vals = evaluate_batch(inst, X)
    assert inst.evaluation_counter == 7
    assert np.allclose(vals, [evaluate(inst, x) for x in X])


def test_precision_examples():
    inst = make_instance(make_class(1, "sphere"), 1)
    assert precision(inst, inst.optimum_value) == 0.0
    assert precision(inst, inst.optimum_value + 2.5) == pytest.approx(2.5)
    assert precision(inst, inst.optimum_value - 1e-12) == 0.0


def test_suites():
    assert len(suite_catalog("classic12-single")) == 12
    multi = suite_instances("classic12-multi5")
    assert len(multi) == 60
    assert {i.instance_id for i in multi} == set(SUITES["classic12-multi5"])
    with pytest.raises(ValueError, match="unknown suite"):
        suite_catalog("nope")


def test_suite_csv_columns():
    buf = io.StringIO()
    write_suite_csv(buf, "classic12-single", suite_instances("classic12-single", 3))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "suite,class_id,name,dimension,instance_id,xshift_0,xshift_1,xshift_2,yshift"
    assert len(lines) == 13


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(list(BASE_FUNCTIONS)), st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_shifted_optimum_has_zero_precision(name, instance_id, seed):
    inst = make_instance(make_class(1, name, 4), instance_id, seed)
    assert precision(inst, evaluate(inst, inst.optimum_location)) < 1e-9
