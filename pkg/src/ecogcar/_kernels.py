"""Hot inner loops of the exemplar classifiers.

Two interchangeable implementations live here: plain numpy and numba
``@njit``. The numba path is used when numba imports cleanly, unless the
environment variable ``ECOGCAR_DISABLE_NUMBA`` is set to 1/true/yes, in
which case the numpy path is selected. Both paths scan exemplars and point
pairs in the same order, so tie-breaking (first minimum wins) is identical.

The line scan is the one that matters: calibrating the feature-line
rejection threshold is cubic in exemplar count, which bootstrap resampling
can push into the tens of thousands of pair evaluations per query.

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _py_nn_scan(exemplars: np.ndarray, q: np.ndarray) -> tuple[int, float]:
    """Index and squared distance of the exemplar nearest to q (first min wins)."""
    diffs = exemplars - q
    d2 = np.einsum("ij,ij->i", diffs, diffs)
    idx = int(np.argmin(d2))
    return idx, float(d2[idx])


def _py_loo_nn_sq_distances(X: np.ndarray) -> np.ndarray:
    """For each row, the squared distance to its nearest other row.

    Direct differences per row (not the Gram-matrix identity): calibration
    must agree with nn_scan to the last bit of rounding, or a threshold at
    the 100th percentile could still reject a training point.
    """
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        diffs = X - X[i]
        d2 = np.einsum("ij,ij->i", diffs, diffs)
        d2[i] = np.inf
        out[i] = d2.min()
    return out


def _py_nfl_scan(
    points: np.ndarray, q: np.ndarray, exclude: int = -1
) -> tuple[float, int, int, float]:
    """Minimum point-to-line squared distance over all point pairs (i < j).

    Pairs containing row ``exclude`` are skipped, as are degenerate pairs
    of identical points. Returns (distance^2, i, j, mu); (inf, -1, -1, nan)
    when no valid pair exists. The projection parameter mu is unconstrained,
    so the match may lie beyond either endpoint.
    """
    n = points.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    if exclude >= 0:
        mask = (ii != exclude) & (jj != exclude)
        ii, jj = ii[mask], jj[mask]
    if ii.size == 0:
        return np.inf, -1, -1, np.nan
    x1 = points[ii]
    direction = points[jj] - x1
    denom = np.einsum("ij,ij->i", direction, direction)
    valid = denom > 0.0
    rel = q - x1
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.einsum("ij,ij->i", rel, direction) / denom
    resid = rel - mu[:, None] * direction
    d2 = np.einsum("ij,ij->i", resid, resid)
    d2[~valid] = np.inf
    best = int(np.argmin(d2))
    if not np.isfinite(d2[best]):
        return np.inf, -1, -1, np.nan
    return float(d2[best]), int(ii[best]), int(jj[best]), float(mu[best])


_PY_IMPLS = {
    "nn_scan": _py_nn_scan,
    "loo_nn_sq_distances": _py_loo_nn_sq_distances,
    "nfl_scan": _py_nfl_scan,
}


def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def nb_nn_scan(exemplars, q):
        n, d = exemplars.shape
        best = -1
        best_d2 = np.inf
        for i in range(n):
            s = 0.0
            for k in range(d):
                diff = exemplars[i, k] - q[k]
                s += diff * diff
            if s < best_d2:
                best_d2 = s
                best = i
        return best, best_d2

    @njit(cache=True)
    def nb_loo_nn_sq_distances(X):
        n, d = X.shape
        out = np.empty(n)
        for i in range(n):
            best = np.inf
            for j in range(n):
                if j == i:
                    continue
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    s += diff * diff
                if s < best:
                    best = s
            out[i] = best
        return out

    @njit(cache=True)
    def nb_nfl_scan(points, q, exclude=-1):
        n, d = points.shape
        best_d2 = np.inf
        best_i = -1
        best_j = -1
        best_mu = np.nan
        for i in range(n):
            if i == exclude:
                continue
            for j in range(i + 1, n):
                if j == exclude:
                    continue
                denom = 0.0
                dot = 0.0
                for k in range(d):
                    dk = points[j, k] - points[i, k]
                    denom += dk * dk
                    dot += (q[k] - points[i, k]) * dk
                if denom == 0.0:
                    continue
                mu = dot / denom
                s = 0.0
                for k in range(d):
                    dk = points[j, k] - points[i, k]
                    resid = q[k] - points[i, k] - mu * dk
                    s += resid * resid
                if s < best_d2:
                    best_d2 = s
                    best_i = i
                    best_j = j
                    best_mu = mu
        return best_d2, best_i, best_j, best_mu

    return {
        "nn_scan": nb_nn_scan,
        "loo_nn_sq_distances": nb_loo_nn_sq_distances,
        "nfl_scan": nb_nfl_scan,
    }


def _numba_disabled() -> bool:
    return os.environ.get("ECOGCAR_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")


_NB_IMPLS = None
if not _numba_disabled():
    try:
        _NB_IMPLS = _build_numba_impls()
    except ImportError:
        _NB_IMPLS = None

USING_NUMBA = _NB_IMPLS is not None
_ACTIVE = _NB_IMPLS if USING_NUMBA else _PY_IMPLS

nn_scan = _ACTIVE["nn_scan"]
loo_nn_sq_distances = _ACTIVE["loo_nn_sq_distances"]
nfl_scan = _ACTIVE["nfl_scan"]

# Direct handles for tests and benchmarks that compare the two paths.
numpy_impls = _PY_IMPLS
numba_impls = _NB_IMPLS
