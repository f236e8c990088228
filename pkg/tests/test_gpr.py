import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdesample import gpr
from sdesample.gpr import FitConfig, GprError, GprHyperparams, GprModel


def lml_oracle(hp, pts, v):
    """Dense log marginal likelihood via slogdet + solve, no Cholesky."""
    m = len(v)
    k = np.array([[gpr.rbf_kernel(a, b, hp) for b in pts] for a in pts]) + hp.noise_variance * np.eye(m)
    sign, logdet = np.linalg.slogdet(k)
    assert sign > 0
    return -0.5 * v @ np.linalg.solve(k, v) - 0.5 * logdet - 0.5 * m * math.log(2 * math.pi)


def fd_grad(hp, pts, v, h=1e-5):
    theta = hp.to_log()
    g = np.empty(3)
    for i in range(3):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fp, _ = gpr.log_marginal_likelihood(GprHyperparams.from_log(tp), pts, v, grad=False)
        fm, _ = gpr.log_marginal_likelihood(GprHyperparams.from_log(tm), pts, v, grad=False)
        g[i] = (fp - fm) / (2 * h)
    return g


def random_problem(rng, m, grid=15):
    flat = rng.choice(grid * grid, size=m, replace=False)
    pts = np.column_stack([flat % grid, flat // grid]).astype(float)
    v = rng.standard_normal(m)
    hp = GprHyperparams(float(rng.uniform(0.8, 6.0)), float(rng.uniform(0.3, 3.0)),
                        float(rng.uniform(0.01, 0.5)))
    return hp, pts, v


def test_rbf_zero_distance():
    assert gpr.rbf_kernel((3, 4), (3, 4), GprHyperparams(2.0, 1.0)) == 1.0


def test_rbf_at_sqrt2_lengthscales():
    # |a-b|^2 = 2 l^2  ->  exp(-1)
    l = 1.5
    b = (math.sqrt(2) * l, 0.0)
    assert gpr.rbf_kernel((0, 0), b, GprHyperparams(l, 1.0)) == pytest.approx(0.36787944117144233,
                                                                               rel=1e-14)


def test_rbf_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    hp = GprHyperparams(2.3, 1.7)
    for _ in range(50):
        a, b = rng.integers(-20, 20, 2), rng.integers(-20, 20, 2)
        kab = gpr.rbf_kernel(a, b, hp)
        assert kab == gpr.rbf_kernel(b, a, hp)
        assert 0 <= kab <= hp.signal_variance


def test_kernel_matrix_single_point():
    np.testing.assert_array_equal(gpr.kernel_matrix([[1, 2]], GprHyperparams(1.0, 2.5)), [[2.5]])


def test_kernel_matrix_duplicated_points_equal_rows():
    k = gpr.kernel_matrix([[0, 0], [0, 0], [3, 1]], GprHyperparams(2.0, 1.0))
    np.testing.assert_array_equal(k[0], k[1])
    assert np.linalg.matrix_rank(k) == 2


def test_kernel_matrix_matches_double_loop():
    rng = np.random.default_rng(5)
    pts = rng.integers(0, 30, size=(5, 2))
    hp = GprHyperparams(4.2, 1.3)
    k = gpr.kernel_matrix(pts, hp)
    oracle = np.array([[gpr.rbf_kernel(a, b, hp) for b in pts] for a in pts])
    np.testing.assert_allclose(k, oracle, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(k, k.T)
    np.testing.assert_array_equal(np.diag(k), np.full(5, 1.3))


def test_lml_matches_dense_oracle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        hp, pts, v = random_problem(rng, 20)
        lml, _ = gpr.log_marginal_likelihood(hp, pts, v)
        assert lml == pytest.approx(lml_oracle(hp, pts, v), rel=1e-10)


def test_lml_rejects_single_point():
    with pytest.raises(ValueError):
        gpr.log_marginal_likelihood(GprHyperparams(1.0, 1.0, 0.1), [[0, 0]], [1.0])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        hp, pts, v = random_problem(rng, 20)
        _, g = gpr.log_marginal_likelihood(hp, pts, v)
        fd = fd_grad(hp, pts, v)
        rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-6)
        assert rel.max() < 1e-4, (g, fd)


def test_lml_decreases_as_signal_variance_vanishes():
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 10, size=(12, 2)).astype(float)
    pts = np.unique(pts, axis=0)
    v = rng.standard_normal(pts.shape[0]) * 2
    vals = [gpr.log_marginal_likelihood(GprHyperparams(2.0, sf2, 1e-3), pts, v, grad=False)[0]
            for sf2 in np.geomspace(1e-2, 1e-3, 6)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def _gp_sample(rng, grid, l, noise=1e-2):
    xs, ys = np.meshgrid(np.arange(grid), np.arange(grid), indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    k = gpr.kernel_matrix(pts, GprHyperparams(l, 1.0)) + 1e-8 * np.eye(len(pts))
    f = np.linalg.cholesky(k) @ rng.standard_normal(len(pts))
    return pts, f + noise * rng.standard_normal(len(pts))


def test_fit_recovers_length_scale():
    rng = np.random.default_rng(7)
    pts, f = _gp_sample(rng, 20, 5.0)
    idx = rng.choice(len(pts), 100, replace=False)
    v = (f[idx] - f[idx].mean()) / f[idx].std()
    model = gpr.fit(pts[idx], v)
    assert 2.5 <= model.hyperparams.length_scale <= 10.0


def test_fit_is_deterministic():
    rng = np.random.default_rng(8)
    pts, f = _gp_sample(rng, 12, 3.0)
    idx = rng.choice(len(pts), 40, replace=False)
    a = gpr.fit(pts[idx], f[idx])
    b = gpr.fit(pts[idx], f[idx])
    assert a.hyperparams == b.hyperparams
    np.testing.assert_array_equal(a.weights, b.weights)


def test_fit_requires_distinct_points():
    with pytest.raises(ValueError):
        gpr.fit([[1, 1], [1, 1]], [0.0, 1.0])


def test_fit_beats_its_starting_points():
    rng = np.random.default_rng(9)
    pts, f = _gp_sample(rng, 12, 3.0)
    idx = rng.choice(len(pts), 50, replace=False)
    v = (f[idx] - f[idx].mean()) / f[idx].std()
    model = gpr.fit(pts[idx], v, FitConfig(restarts=3))
    for mult, lml, _ in model.history:
        start = GprHyperparams(mult * 11, 1.0, 0.1)
        assert lml >= gpr.log_marginal_likelihood(start, pts[idx], v, grad=False)[0]
    assert model.log_likelihood == max(h[1] for h in model.history)


def test_fit_config_restart_multipliers():
    assert FitConfig().initial_multipliers() == [0.05, 0.1, 0.3]
    assert FitConfig(restarts=1).initial_multipliers() == [0.05]
    assert len(FitConfig(restarts=5).initial_multipliers()) == 5
    with pytest.raises(ValueError):
        FitConfig(restarts=0)


def test_chol_reconstructs_kernel():
    rng = np.random.default_rng(1)
    hp, pts, v = random_problem(rng, 30)
    model = GprModel.condition(pts, v, hp)
    k = gpr.kernel_matrix(pts, hp) + (hp.noise_variance + model.jitter) * np.eye(30)
    rec = model.chol @ model.chol.T
    assert np.linalg.norm(rec - k) / np.linalg.norm(k) < 1e-8
    assert np.all(np.isfinite(model.weights))


def test_predict_interpolates_training_points():
    rng = np.random.default_rng(4)
    pts = np.column_stack([rng.permutation(40)[:10], rng.permutation(40)[:10]]).astype(float)
    v = rng.standard_normal(10)
    model = GprModel.condition(pts, v, GprHyperparams(3.0, 1.0, 1e-10))
    np.testing.assert_allclose(gpr.predict_mean(model, pts), v, atol=1e-6)


def test_predict_far_query_reverts_to_prior_mean():
    model = GprModel.condition([[0, 0], [1, 0], [0, 1]], [1.0, -2.0, 0.5],
                               GprHyperparams(1.0, 1.0, 1e-4))
    assert abs(gpr.predict_mean(model, [[500, 500]])[0]) < 1e-6


def test_predict_single_training_point_closed_form():
    l, d, v1 = 2.0, 3.0, 1.7
    model = GprModel.condition([[0, 0]], [v1], GprHyperparams(l, 1.0, 0.0))
    pred = gpr.predict_mean(model, [[d, 0]])[0]
    assert pred == pytest.approx(math.exp(-d * d / (2 * l * l)) * v1, rel=1e-14)


def test_predict_var_bounds():
    model = GprModel.condition([[0, 0], [5, 5]], [1.0, -1.0], GprHyperparams(2.0, 1.5, 1e-3))
    var = gpr.predict_var(model, [[0, 0], [100, 100]])
    assert var[0] < 0.01
    assert var[1] == pytest.approx(1.5)


def test_jitter_escalation_rescues_duplicates():
    model = GprModel.condition([[0, 0], [0, 0], [2, 0]], [1.0, 1.0, 0.0],
                               GprHyperparams(1.0, 1.0, 0.0))
    assert 0 < model.jitter <= 1e-6


def test_jitter_escalation_gives_up():
    with pytest.raises(GprError):
        gpr._cholesky_escalating(-np.ones((5, 5)), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_predict_linear_in_values(seed):
    rng = np.random.default_rng(seed)
    hp, pts, v = random_problem(rng, 15)
    q = rng.integers(0, 15, size=(8, 2))
    a = gpr.predict_mean(GprModel.condition(pts, v, hp), q)
    b = gpr.predict_mean(GprModel.condition(pts, 2 * v, hp), q)
    np.testing.assert_allclose(b, 2 * a, rtol=1e-10, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_predict_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    hp, pts, v = random_problem(rng, 15)
    q = rng.integers(0, 15, size=(8, 2))
    perm = rng.permutation(15)
    a = gpr.predict_mean(GprModel.condition(pts, v, hp), q)
    b = gpr.predict_mean(GprModel.condition(pts[perm], v[perm], hp), q)
    np.testing.assert_allclose(a, b, atol=1e-10)
