import os
import subprocess
import sys

import numpy as np
import pytest

from ecogcar import _kernels


needs_both = pytest.mark.skipif(
    _kernels.numba_impls is None, reason="numba path unavailable"
)


@needs_both
class TestPathEquivalence:
    def test_nn_scan(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            X = rng.normal(size=(int(rng.integers(1, 30)), int(rng.integers(1, 12))))
            q = rng.normal(size=X.shape[1])
            py = _kernels.numpy_impls["nn_scan"](X, q)
            nb = _kernels.numba_impls["nn_scan"](X, q)
            assert py[0] == nb[0]
            assert py[1] == pytest.approx(nb[1], rel=1e-12)

    def test_nn_scan_tie_order(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]])
        q = np.zeros(2)
        assert _kernels.numpy_impls["nn_scan"](X, q)[0] == 0
        assert _kernels.numba_impls["nn_scan"](X, q)[0] == 0

    def test_loo_distances(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            X = rng.normal(size=(int(rng.integers(2, 40)), int(rng.integers(1, 10))))
            py = _kernels.numpy_impls["loo_nn_sq_distances"](X)
            nb = _kernels.numba_impls["loo_nn_sq_distances"](X)
            assert np.allclose(py, nb, rtol=1e-10, atol=1e-12)

    def test_nfl_scan(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            P = rng.normal(size=(n, int(rng.integers(1, 8))))
            q = rng.normal(size=P.shape[1])
            exclude = int(rng.integers(-1, n))
            py = _kernels.numpy_impls["nfl_scan"](P, q, exclude)
            nb = _kernels.numba_impls["nfl_scan"](P, q, exclude)
            assert py[1:3] == nb[1:3]
            assert py[0] == pytest.approx(nb[0], rel=1e-10)

    def test_nfl_scan_duplicates_and_exclusion(self):
        P = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        q = np.array([0.5, 1.0])
        for impls in (_kernels.numpy_impls, _kernels.numba_impls):
            d, i, j, mu = impls["nfl_scan"](P, q, -1)
            assert (i, j) == (0, 2)  # pair (0,1) is degenerate, skipped
            assert d == pytest.approx(1.0)
            d, i, j, mu = impls["nfl_scan"](P[:2], q, -1)
            assert (i, j) == (-1, -1)
            assert np.isinf(d)

    def test_nfl_scan_exclusion_removes_pairs(self):
        P = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 5.0]])
        q = np.array([1.0, 1.0])
        for impls in (_kernels.numpy_impls, _kernels.numba_impls):
            d_all, i, j, _ = impls["nfl_scan"](P, q, -1)
            assert (i, j) == (1, 2)  # the slanted line passes nearest
            d_excl, i, j, _ = impls["nfl_scan"](P, q, 1)
            assert (i, j) == (0, 2)  # only the remaining pair is eligible
            assert d_excl > d_all


class TestEnvironmentFlag:
    def test_disable_flag_selects_numpy(self):
        code = (
            "import ecogcar._kernels as k; "
            "print(k.USING_NUMBA, k.nn_scan is k.numpy_impls['nn_scan'])"
        )
        env = dict(os.environ, ECOGCAR_DISABLE_NUMBA="1")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.stdout.strip() == "False True"

    def test_default_prefers_numba_when_available(self):
        if _kernels.numba_impls is None:
            pytest.skip("numba not importable here")
        assert _kernels.USING_NUMBA
        assert _kernels.nn_scan is _kernels.numba_impls["nn_scan"]
