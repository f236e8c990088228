import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdesample import _pykernels, kernels

try:
    from sdesample import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("SDESAMPLE_PURE_PYTHON", None)
    if env_value is not None:
        env["SDESAMPLE_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "from sdesample import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_var_forces_fallback():
    assert _backend_in_subprocess("1") == "python"


@needs_ext
def test_extension_selected_by_default():
    assert _backend_in_subprocess(None) == "cython"


def test_sq_dists_matches_loop():
    a = np.array([[0, 0], [1, 2], [5, -3]], dtype=float)
    b = np.array([[1, 1], [0, 0]], dtype=float)
    oracle = [[(p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 for q in b] for p in a]
    np.testing.assert_array_equal(kernels.sq_dists(a, b), oracle)
    np.testing.assert_array_equal(_pykernels.sq_dists(a, b), oracle)


points = st.integers(1, 25).flatmap(
    lambda n: st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40)), min_size=n,
                       max_size=n))


@needs_ext
@settings(max_examples=60, deadline=None)
@given(points, points, st.floats(0.1, 20), st.floats(0.01, 10))
def test_rbf_backends_agree(a, b, l, sf2):
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = _ckernels.rbf_cross(a, b, l, sf2)
    p = _pykernels.rbf_cross(a, b, l, sf2)
    np.testing.assert_allclose(c, p, rtol=1e-13, atol=1e-300)
    np.testing.assert_array_equal(_ckernels.sq_dists(a, b), _pykernels.sq_dists(a, b))


@needs_ext
@settings(max_examples=60, deadline=None)
@given(st.integers(2, 400), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**31))
def test_scan_backends_agree(n, alpha, beta, seed):
    if alpha == 0 and beta == 0:
        return
    rng = np.random.default_rng(seed)
    flat = rng.choice(40 * 40, size=n, replace=False)
    xs, ys = flat % 40, flat // 40
    order = rng.permutation(n)
    target = int(rng.integers(1, n + 1))
    acc_c, rej_c = _ckernels.sde_scan(xs, ys, order, target, alpha, beta)
    acc_p, rej_p = _pykernels.sde_scan(xs, ys, order, target, alpha, beta)
    np.testing.assert_array_equal(acc_c, acc_p)
    np.testing.assert_array_equal(rej_c, rej_p)


def test_scan_zero_target_returns_empty():
    acc, rej = kernels.sde_scan(np.arange(3), np.arange(3), np.arange(3), 0, 1, 1)
    assert acc.shape[0] == 0 and rej.shape[0] == 0
