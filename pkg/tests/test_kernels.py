import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scmkit import _kernels
from scmkit.solver import brute_force_inner, inner_objective, solve_inner

needs_numba = pytest.mark.skipif(not _kernels.NUMBA_AVAILABLE, reason="numba not installed")

vec = arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50, width=64))


@settings(max_examples=100, deadline=None)
@given(vec)
def test_projection_properties(y):
    w = _kernels.NUMPY.project_simplex(y)
    assert w.min() >= 0 and abs(w.sum() - 1) < 1e-9
    # optimality: (y - w) is constant on the support and no larger off it
    d = y - w
    s = w > 0
    assert np.ptp(d[s]) < 1e-9
    if (~s).any():
        assert d[~s].max() <= d[s].min() + 1e-9
    np.testing.assert_allclose(_kernels.NUMPY.project_simplex(w), w, atol=1e-12)


@needs_numba
@settings(max_examples=100, deadline=None)
@given(vec)
def test_projection_parity(y):
    np.testing.assert_allclose(_kernels.NUMBA.project_simplex(y),
                               _kernels.NUMPY.project_simplex(y), atol=1e-12)


@needs_numba
@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_backend_parity(seed):
    rng = np.random.default_rng(seed)
    K, J = rng.integers(1, 5), rng.integers(2, 6)
    X0 = rng.uniform(-2, 2, (K, J))
    X1 = rng.uniform(-2, 2, K)
    v = rng.dirichlet(np.ones(K))
    with _kernels.use_backend("numpy"):
        a = solve_inner(X1, X0, v)
        ga = brute_force_inner(X1, X0, v, 0.05)
    with _kernels.use_backend("numba"):
        b = solve_inner(X1, X0, v)
        gb = brute_force_inner(X1, X0, v, 0.05)
    assert inner_objective(X1, X0, v, a) == pytest.approx(
        inner_objective(X1, X0, v, b), abs=1e-9)
    np.testing.assert_array_equal(ga, gb)


def test_use_backend_restores():
    before = _kernels.active().name
    with _kernels.use_backend("numpy"):
        assert _kernels.active().name == "numpy"
    assert _kernels.active().name == before
    with pytest.raises(ValueError):
        _kernels.backend("fortran")


def test_env_flag_selects_numpy():
    env = dict(os.environ, SCMKIT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "from scmkit import _kernels; print(_kernels.active().name)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
