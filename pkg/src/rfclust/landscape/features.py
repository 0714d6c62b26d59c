"""Exploratory landscape analysis feature groups.

Each ``feature_group_*`` function returns a :class:`Features` dict. Degenerate
inputs never produce NaN or infinity: the affected feature gets a fixed
sentinel value and its name is added to ``Features.flags``.

Sentinels
---------
distr      zero variance -> skewness 0, kurtosis 0, number_of_peaks 1
meta       constant y -> r2 0; zero denominator in a ratio -> ratio 0;
           rank-deficient design -> ridge fit (penalty 1e-10), all meta flagged
disp       never degenerate once each subset holds two points
ic         constant y -> every feature 0; an epsilon of exactly 0 is reported
           as log10 value -6 (one decade below the grid)
nbc        no strict improvement anywhere -> ratios 1, correlations 0, cv 0;
           zero spread in a ratio or correlation -> the same sentinel per feature
pca        zero-variance columns are dropped from correlation matrices (flagged);
           nothing left -> fraction 1, first-component share 1
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

DISP_QUANTILES = (0.02, 0.05, 0.10, 0.25)
IC_EPS_EXPONENTS = np.linspace(-5.0, 15.0, 1000)
IC_SETTLING = 0.05
IC_RATIO = 0.5
EPS_ZERO_LOG = -6.0
RIDGE_PENALTY = 1e-10
PCA_THRESHOLD = 0.9


class Features(dict):
    """Feature name -> value, plus the names that fell back to a sentinel."""

    def __init__(self, *args, flags=(), **kwargs):
        super().__init__(*args, **kwargs)
        self.flags = set(flags)


def _qtag(q: float) -> str:
    return f"{int(round(q * 100)):02d}"


def disp_names(quantiles=DISP_QUANTILES) -> list[str]:
    return [f"disp_{kind}_{stat}_{_qtag(q)}" for q in quantiles
            for kind in ("ratio", "diff") for stat in ("mean", "median")]


FEATURE_NAMES: tuple[str, ...] = tuple(
    ["distr_skewness", "distr_kurtosis", "distr_number_of_peaks"]
    + ["meta_lin_r2", "meta_lin_intercept", "meta_lin_coef_min", "meta_lin_coef_max",
       "meta_lin_coef_max_by_min", "meta_quad_r2", "meta_quad_cond"]
    + disp_names()
    + ["ic_h_max", "ic_eps_s", "ic_eps_max", "ic_m0", "ic_eps_ratio"]
    + ["nbc_nb_dist_ratio_sd", "nbc_nb_dist_ratio_mean", "nbc_nb_cor",
       "nbc_dist_ratio_coeff_var", "nbc_fitness_cor"]
    + ["pca_expl_var_cov_x", "pca_expl_var_cor_x", "pca_expl_var_cov_init",
       "pca_expl_var_cor_init", "pca_expl_var_pc1_cov_x", "pca_expl_var_pc1_cor_x",
       "pca_expl_var_pc1_cov_init", "pca_expl_var_pc1_cor_init"]
)

# y -> y + c must leave all of these unchanged; y -> lambda*y the second set
SHIFT_INVARIANT = tuple(n for n in FEATURE_NAMES if n != "meta_lin_intercept")
SCALE_INVARIANT = tuple(
    ["distr_skewness", "distr_kurtosis", "distr_number_of_peaks",
     "meta_lin_r2", "meta_lin_coef_max_by_min", "meta_quad_r2", "meta_quad_cond"]
    + disp_names()
    + ["ic_h_max", "ic_eps_s", "ic_eps_max", "ic_m0", "ic_eps_ratio"]
    + ["nbc_nb_dist_ratio_sd", "nbc_nb_dist_ratio_mean", "nbc_nb_cor",
       "nbc_dist_ratio_coeff_var", "nbc_fitness_cor"]
    + ["pca_expl_var_cov_x", "pca_expl_var_cor_x", "pca_expl_var_pc1_cov_x",
       "pca_expl_var_pc1_cor_x", "pca_expl_var_cor_init", "pca_expl_var_pc1_cor_init"]
)


def _ratio(num: float, den: float, sentinel: float) -> tuple[float, bool]:
    if den == 0 or not np.isfinite(num / den):
        return sentinel, True
    return float(num / den), False


def _corr(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0:
        return 0.0, True
    return float(np.clip((a @ b) / den, -1.0, 1.0)), False


# --- y-distribution ---------------------------------------------------------

def count_histogram_peaks(y: np.ndarray) -> int:
    """Local maxima of a Freedman-Diaconis histogram smoothed over 3 bins.

    Runs of equal smoothed heights count once; the region outside the
    histogram is treated as lower than any bin.
    """
    lo, hi = float(y.min()), float(y.max())
    if hi == lo:
        return 1
    q75, q25 = np.percentile(y, [75, 25])
    width = 2.0 * (q75 - q25) * len(y) ** (-1.0 / 3.0)
    if width > 0:
        bins = int(min(max(math.ceil((hi - lo) / width), 1), 10 * len(y)))
    else:
        bins = int(math.ceil(math.log2(len(y)))) + 1
    idx = np.minimum(((y - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    smooth = np.convolve(counts, np.ones(3) / 3.0, mode="same")
    keep = np.concatenate(([True], smooth[1:] != smooth[:-1]))
    runs = np.concatenate(([-1.0], smooth[keep], [-1.0]))
    peaks = (runs[1:-1] > runs[:-2]) & (runs[1:-1] > runs[2:])
    return int(peaks.sum())


def feature_group_distr(y) -> Features:
    y = np.asarray(y, dtype=float)
    if len(y) < 4:
        raise ValueError("y-distribution features need at least 4 values")
    names = ("distr_skewness", "distr_kurtosis", "distr_number_of_peaks")
    if np.ptp(y) == 0:
        return Features(zip(names, (0.0, 0.0, 1.0)), flags=names)
    # standardise first so tiny spreads around a large offset stay accurate
    z = (y - y.mean()) / y.std()
    return Features({
        "distr_skewness": float(stats.skew(z, bias=False)),
        "distr_kurtosis": float(stats.kurtosis(z, fisher=True, bias=False)),
        "distr_number_of_peaks": float(count_histogram_peaks(y)),
    })


# --- meta-model ---------------------------------------------------------------

def _fit(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, bool]:
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        coef = np.linalg.solve(A.T @ A + RIDGE_PENALTY * np.eye(A.shape[1]), A.T @ y)
        return coef, True
    return coef, False


def _adjusted_r2(y: np.ndarray, fitted: np.ndarray, p: int) -> tuple[float, bool]:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 0.0, True
    r2 = 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot
    n = len(y)
    if n - p - 1 <= 0:
        return r2, True
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1), False


def feature_group_meta(X, y) -> Features:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, D = X.shape
    if n <= 2 * D + 1:
        raise ValueError("meta-model features need more rows than 2*D + 1")
    out = Features()
    offset = y.mean()
    yc = y - offset
    ones = np.ones((n, 1))

    lin, lin_singular = _fit(np.hstack([ones, X]), yc)
    quad_design = np.hstack([ones, X, X**2])
    quad, quad_singular = _fit(quad_design, yc)

    r2, bad = _adjusted_r2(yc, np.hstack([ones, X]) @ lin, D)
    out["meta_lin_r2"] = r2
    if bad:
        out.flags.add("meta_lin_r2")
    out["meta_lin_intercept"] = float(lin[0] + offset)
    slopes = np.abs(lin[1:])
    out["meta_lin_coef_min"] = float(slopes.min())
    out["meta_lin_coef_max"] = float(slopes.max())
    out["meta_lin_coef_max_by_min"], bad = _ratio(slopes.max(), slopes.min(), 0.0)
    if bad:
        out.flags.add("meta_lin_coef_max_by_min")

    r2, bad = _adjusted_r2(yc, quad_design @ quad, 2 * D)
    out["meta_quad_r2"] = r2
    if bad:
        out.flags.add("meta_quad_r2")
    qc = np.abs(quad[1 + D:])
    out["meta_quad_cond"], bad = _ratio(qc.max(), qc.min(), 0.0)
    if bad:
        out.flags.add("meta_quad_cond")

    if lin_singular:
        out.flags.update(n for n in out if n.startswith("meta_lin"))
    if quad_singular:
        out.flags.update(("meta_quad_r2", "meta_quad_cond"))
    return out


# --- dispersion ------------------------------------------------------------------

def distance_summary(X: np.ndarray) -> tuple[float, float]:
    """Mean and median of all pairwise Euclidean distances."""
    d = pdist(X)
    return float(d.mean()), float(np.median(d))


def best_fraction_size(q: float, n: int) -> int:
    # the tolerance keeps e.g. 0.05 * 8000 from rounding up to 401
    return min(n, max(2, math.ceil(q * n - 1e-9)))


def feature_group_disp(X, y, quantiles=DISP_QUANTILES, all_stats=None) -> Features:
    """Dispersion of the best points relative to the whole sample.

    ``all_stats`` may carry a precomputed ``distance_summary(X)``; it depends
    on X alone, so callers sharing one design across problems pass it in.
    Ties in y are broken by sample index.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    mean_all, med_all = distance_summary(X) if all_stats is None else all_stats
    order = np.argsort(y, kind="stable")
    out = Features()
    for q in quantiles:
        k = best_fraction_size(q, len(y))
        mean_q, med_q = distance_summary(X[order[:k]])
        tag = _qtag(q)
        out[f"disp_ratio_mean_{tag}"] = mean_q / mean_all
        out[f"disp_ratio_median_{tag}"] = med_q / med_all
        out[f"disp_diff_mean_{tag}"] = mean_q - mean_all
        out[f"disp_diff_median_{tag}"] = med_q - med_all
    return out


# --- information content -------------------------------------------------------

def nearest_neighbor_tour(X: np.ndarray, start: int, knn=None) -> np.ndarray:
    """Greedy tour: repeatedly step to the closest unvisited point.

    With a ``knn_table`` the first unvisited entry of the current point's
    sorted neighbour list is taken; only when all listed neighbours are
    visited is every point scanned.
    """
    n = len(X)
    sq = np.einsum("ij,ij->i", X, X)
    visited = np.zeros(n, dtype=bool)
    tour = np.empty(n, dtype=np.int64)
    cur = start
    for i in range(n):
        tour[i] = cur
        visited[cur] = True
        if i == n - 1:
            break
        nxt = -1
        if knn is not None:
            for j in knn[1][cur]:
                if not visited[j]:
                    nxt = int(j)
                    break
        if nxt < 0:
            d2 = sq - 2.0 * (X @ X[cur])
            d2[visited] = np.inf
            nxt = int(np.argmin(d2))
        cur = nxt
    return tour


def _entropy_and_partial(psi: np.ndarray) -> tuple[float, float]:
    """Block entropy (log base 6) and partial information of one symbol row."""
    n_steps = len(psi)
    if n_steps < 2:
        h = 0.0
    else:
        codes = 3 * (psi[:-1] + 1) + (psi[1:] + 1)
        counts = np.bincount(codes, minlength=9).astype(float)
        counts[[0, 4, 8]] = 0.0
        p = counts[counts > 0] / (n_steps - 1)
        h = float(-(p * np.log(p)).sum() / math.log(6.0))
    nz = psi[psi != 0]
    if len(nz) == 0:
        m = 0.0
    else:
        m = (1 + int(np.count_nonzero(nz[1:] != nz[:-1]))) / n_steps
    return h, m


def information_content(y_seq, eps_exponents=IC_EPS_EXPONENTS) -> Features:
    """IC features of a value sequence already ordered along a walk."""
    y_seq = np.asarray(y_seq, dtype=float)
    names = ("ic_h_max", "ic_eps_s", "ic_eps_max", "ic_m0", "ic_eps_ratio")
    diffs = np.diff(y_seq)
    scale = float(np.max(np.abs(diffs))) if len(diffs) else 0.0
    if scale == 0:
        return Features(dict.fromkeys(names, 0.0), flags=names)
    rel = diffs / scale
    # a relative epsilon >= 1 zeroes every symbol, so H = M = 0 from there on
    exps = np.concatenate(([-np.inf], eps_exponents[eps_exponents <= 0.0]))
    H = np.zeros(len(exps))
    M = np.zeros(len(exps))
    for i, e in enumerate(exps):
        eps = 0.0 if e == -np.inf else 10.0**e
        psi = np.where(rel > eps, 1, np.where(rel < -eps, -1, 0)).astype(np.int64)
        H[i], M[i] = _entropy_and_partial(psi)
    tail = eps_exponents[eps_exponents > 0.0]
    exps_full = np.concatenate((exps, tail))
    H = np.concatenate((H, np.zeros(len(tail))))
    M = np.concatenate((M, np.zeros(len(tail))))
    logs = np.where(np.isneginf(exps_full), EPS_ZERO_LOG, exps_full)

    out = Features()
    out["ic_h_max"] = float(H.max())
    out["ic_eps_max"] = float(logs[int(np.argmax(H))])
    out["ic_eps_s"] = float(logs[int(np.argmax(H < IC_SETTLING))])
    m0 = float(M[0])
    out["ic_m0"] = m0
    if m0 == 0:
        out["ic_eps_ratio"] = 0.0
        out.flags.add("ic_eps_ratio")
    else:
        above = np.nonzero(M > IC_RATIO * m0)[0]
        out["ic_eps_ratio"] = float(logs[above[-1]])
    return out


def feature_group_ic(X, y, knn=None) -> Features:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise ValueError("information content needs at least 3 points")
    tour = nearest_neighbor_tour(X, int(np.argmin(y)), knn)
    return information_content(y[tour])


# --- nearest-better clustering ----------------------------------------------------

def knn_table(X: np.ndarray, k: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Distances and indices of each point's ``k + 1`` nearest points (self included)."""
    n = len(X)
    kk = min(n, k + 1)
    dist, idx = cKDTree(X).query(X, k=kk)
    return dist.reshape(n, kk), idx.reshape(n, kk)


def nearest_better_distances(X: np.ndarray, y: np.ndarray, knn=None):
    """Nearest-neighbour and nearest-better-neighbour distance of every point.

    A point without any strictly better point gets its nearest-neighbour
    distance as its nearest-better distance. The k-d tree answers most
    queries; points with no better one among their ``k`` nearest fall back
    to a scan of all points. ``knn`` may carry a precomputed ``knn_table(X)``.
    """
    n = len(X)
    dist, idx = knn_table(X) if knn is None else knn
    not_self = idx != np.arange(n)[:, None]
    first = np.argmax(not_self, axis=1)
    nn = dist[np.arange(n), first]
    better = (y[idx] < y[:, None]) & not_self
    has = better.any(axis=1)
    nb = np.where(has, dist[np.arange(n), np.argmax(better, axis=1)], np.inf)
    for i in np.nonzero(~has)[0]:
        mask = y < y[i]
        if mask.any():
            nb[i] = np.sqrt(np.min(np.sum((X[mask] - X[i]) ** 2, axis=1)))
    nb = np.where(np.isinf(nb), nn, nb)
    return nn, nb


def feature_group_nbc(X, y, knn=None) -> Features:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    names = ("nbc_nb_dist_ratio_sd", "nbc_nb_dist_ratio_mean", "nbc_nb_cor",
             "nbc_dist_ratio_coeff_var", "nbc_fitness_cor")
    if len(y) < 2:
        raise ValueError("nearest-better features need at least 2 points")
    if np.ptp(y) == 0:
        return Features(zip(names, (1.0, 1.0, 0.0, 0.0, 0.0)), flags=names)
    nn, nb = nearest_better_distances(X, y, knn)
    out = Features()
    ddof = 1
    out["nbc_nb_dist_ratio_sd"], bad = _ratio(nn.std(ddof=ddof), nb.std(ddof=ddof), 1.0)
    if bad:
        out.flags.add("nbc_nb_dist_ratio_sd")
    out["nbc_nb_dist_ratio_mean"], bad = _ratio(nn.mean(), nb.mean(), 1.0)
    if bad:
        out.flags.add("nbc_nb_dist_ratio_mean")
    out["nbc_nb_cor"], bad = _corr(nn, nb)
    if bad:
        out.flags.add("nbc_nb_cor")
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(nb > 0, nn / nb, 1.0)
    out["nbc_dist_ratio_coeff_var"], bad = _ratio(quot.std(ddof=ddof), quot.mean(), 0.0)
    if bad:
        out.flags.add("nbc_dist_ratio_coeff_var")
    out["nbc_fitness_cor"], bad = _corr(quot, stats.rankdata(y))
    if bad:
        out.flags.add("nbc_fitness_cor")
    return out


# --- principal components --------------------------------------------------------

def _explained(mat: np.ndarray) -> tuple[float, float]:
    eig = np.clip(np.linalg.eigvalsh(np.atleast_2d(mat))[::-1], 0.0, None)
    total = eig.sum()
    if total == 0:
        return 1.0, 1.0
    share = np.cumsum(eig) / total
    needed = int(np.argmax(share >= PCA_THRESHOLD - 1e-12)) + 1
    return needed / len(eig), float(eig[0] / total)


def _pca_pair(M: np.ndarray) -> tuple[float, float, float, float, bool]:
    frac_cov, pc1_cov = _explained(np.cov(M, rowvar=False))
    keep = M.std(axis=0) > 0
    dropped = not keep.all()
    if keep.sum() < 2:
        frac_cor, pc1_cor = 1.0, 1.0
    else:
        frac_cor, pc1_cor = _explained(np.corrcoef(M[:, keep], rowvar=False))
    return frac_cov, frac_cor, pc1_cov, pc1_cor, dropped


def feature_group_pca(X, y) -> Features:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, D = X.shape
    if n < D + 2:
        raise ValueError("PCA features need at least D + 2 rows")
    out = Features()
    for tag, M in (("x", X), ("init", np.column_stack([X, y]))):
        frac_cov, frac_cor, pc1_cov, pc1_cor, dropped = _pca_pair(M)
        out[f"pca_expl_var_cov_{tag}"] = frac_cov
        out[f"pca_expl_var_cor_{tag}"] = frac_cor
        out[f"pca_expl_var_pc1_cov_{tag}"] = pc1_cov
        out[f"pca_expl_var_pc1_cor_{tag}"] = pc1_cor
        if dropped:
            out.flags.update((f"pca_expl_var_cor_{tag}", f"pca_expl_var_pc1_cor_{tag}"))
    return out


GROUPS = ("distr", "meta", "disp", "ic", "nbc", "pca")


def all_features(X, y, all_stats=None, knn=None) -> Features:
    """Every group on one sample, in canonical feature order."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    merged = Features()
    for part in (feature_group_distr(y), feature_group_meta(X, y),
                 feature_group_disp(X, y, all_stats=all_stats), feature_group_ic(X, y, knn),
                 feature_group_nbc(X, y, knn), feature_group_pca(X, y)):
        merged.update(part)
        merged.flags |= part.flags
    return Features({k: merged[k] for k in FEATURE_NAMES}, flags=merged.flags)
