"""Gaussian process regression on 2-D grid coordinates with an RBF kernel.

The prior mean is zero, so values should be standardized first.  Hyperparameters
(length scale, signal variance, noise variance) are fitted by maximizing the log
marginal likelihood with gradient ascent in log-parameter space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotri

from sdesample import kernels

__all__ = [
    "GprError",
    "GprHyperparams",
    "FitConfig",
    "GprModel",
    "rbf_kernel",
    "kernel_matrix",
    "log_marginal_likelihood",
    "fit",
    "predict_mean",
    "predict_var",
]

_LOG_2PI = math.log(2.0 * math.pi)
JITTER_START = 1e-10
JITTER_MAX = 1e-6


class GprError(RuntimeError):
    pass


@dataclass(frozen=True)
class GprHyperparams:
    length_scale: float
    signal_variance: float
    noise_variance: float = JITTER_START

    def __post_init__(self):
        vals = (self.length_scale, self.signal_variance, self.noise_variance)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite hyperparameters {vals}")
        if self.length_scale <= 0 or self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError(f"invalid hyperparameters {vals}")

    @classmethod
    def from_log(cls, theta) -> "GprHyperparams":
        return cls(*(float(math.exp(t)) for t in theta))

    def to_log(self) -> np.ndarray:
        return np.log([self.length_scale, self.signal_variance, self.noise_variance])


@dataclass(frozen=True)
class FitConfig:
    restarts: int = 3
    length_scale_multipliers: tuple[float, ...] = (0.05, 0.1, 0.3)
    max_iter: int = 200
    tol: float = 1e-6
    jitter_floor: float = 1e-10
    init_signal_variance: float = 1.0
    init_noise_variance: float = 0.1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iter < 1 or not self.tol > 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")

    def initial_multipliers(self) -> list[float]:
        base = list(self.length_scale_multipliers)
        if self.restarts <= len(base):
            return base[: self.restarts]
        lo, hi = min(base), max(base)
        extra = np.geomspace(lo, hi, self.restarts - len(base) + 2)[1:-1]
        return base + [float(e) for e in extra]


def rbf_kernel(a, b, hp: GprHyperparams) -> float:
    """``sf2 * exp(-|a - b|^2 / (2 l^2))`` for two points."""
    dx = float(a[0]) - float(b[0])
    dy = float(a[1]) - float(b[1])
    return hp.signal_variance * math.exp(-(dx * dx + dy * dy) / (2.0 * hp.length_scale ** 2))


def kernel_matrix(points, hp: GprHyperparams, others=None) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    q = p if others is None else np.asarray(others, dtype=np.float64).reshape(-1, 2)
    return kernels.rbf_cross(p, q, hp.length_scale, hp.signal_variance)


def _cholesky_escalating(k: np.ndarray, noise: float):
    """Cholesky of ``k + noise*I``, adding jitter 1e-10..1e-6 on failure.

    Returns the lower factor and the extra jitter that was needed.
    """
    m = k.shape[0]
    extra = 0.0
    while True:
        a = k.copy()
        a.flat[:: m + 1] += noise + extra
        try:
            return cholesky(a, lower=True, check_finite=False), extra
        except np.linalg.LinAlgError:
            pass
        extra = JITTER_START if extra == 0.0 else extra * 10.0
        if extra > JITTER_MAX * (1 + 1e-9):
            raise GprError("Cholesky failed after jitter escalation; ill-conditioned hyperparameters")


@dataclass(frozen=True, eq=False)
class GprModel:
    """Conditioned GP: training inputs, Cholesky factor of ``K + sn2 I`` and weights."""

    train_points: np.ndarray
    train_values: np.ndarray
    hyperparams: GprHyperparams
    chol: np.ndarray
    weights: np.ndarray
    jitter: float = 0.0
    log_likelihood: float = float("nan")
    history: tuple = field(default=(), repr=False)

    @classmethod
    def condition(cls, points, values, hp: GprHyperparams, **extra) -> "GprModel":
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        v = np.asarray(values, dtype=np.float64).reshape(-1)
        if p.shape[0] != v.shape[0] or p.shape[0] == 0:
            raise ValueError("points and values must be non-empty and of equal length")
        k = kernel_matrix(p, hp)
        chol, jitter = _cholesky_escalating(k, hp.noise_variance)
        weights = cho_solve((chol, True), v, check_finite=False)
        if not np.all(np.isfinite(weights)):
            raise GprError("non-finite GP weights")
        if "log_likelihood" not in extra:
            fit_term = float(v @ weights)
            logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
            extra["log_likelihood"] = -0.5 * fit_term - 0.5 * logdet - 0.5 * v.shape[0] * _LOG_2PI
        return cls(p, v, hp, chol, weights, jitter, **extra)

    def predict(self, queries) -> np.ndarray:
        return predict_mean(self, queries)


def _inverse_from_chol(chol: np.ndarray) -> np.ndarray:
    inv, info = dpotri(chol, lower=1)
    if info != 0:
        raise GprError(f"dpotri failed (info={info})")
    inv = np.tril(inv)
    return inv + np.tril(inv, -1).T


def log_marginal_likelihood(hp: GprHyperparams, points, values, *, sq=None, grad=True):
    """Log marginal likelihood and its gradient w.r.t. (log l, log sf2, log sn2).

    Parameters
    ----------
    hp : GprHyperparams
    points : (M, 2) array_like
    values : (M,) array_like
        Standardized training values.
    sq : ndarray, optional
        Precomputed squared-distance matrix of ``points``.

    Returns
    -------
    lml : float
    grad : ndarray, shape (3,)
        Omitted (``None``) when ``grad=False``.

    Raises
    ------
    ValueError
        Fewer than two training points.
    GprError
        Cholesky failure after jitter escalation.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    m = v.shape[0]
    if m < 2 or p.shape[0] != m:
        raise ValueError("log marginal likelihood needs M >= 2 matching points and values")
    if sq is None:
        sq = kernels.sq_dists(p, p)
    l2 = hp.length_scale * hp.length_scale
    kf = hp.signal_variance * np.exp(sq * (-0.5 / l2))
    chol, _ = _cholesky_escalating(kf, hp.noise_variance)
    alpha = cho_solve((chol, True), v, check_finite=False)
    lml = (-0.5 * float(v @ alpha) - float(np.sum(np.log(np.diag(chol))))
           - 0.5 * m * _LOG_2PI)

    if not grad:
        return lml, None

    w = np.outer(alpha, alpha)
    w -= _inverse_from_chol(chol)
    wk = w * kf
    g = np.empty(3)
    g[0] = 0.5 * float(np.vdot(wk, sq)) / l2
    g[1] = 0.5 * float(wk.sum())
    g[2] = 0.5 * hp.noise_variance * float(np.trace(w))
    return lml, g


def _ascend(theta, lo, hi, objective, cfg: FitConfig):
    """Projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking."""
    f, g = objective(theta, True)
    trace = [f]
    prev_theta = prev_g = None
    step = 0.1 / max(float(np.linalg.norm(g)), 1e-12)
    for _ in range(cfg.max_iter):
        if prev_theta is not None:
            s = theta - prev_theta
            y = g - prev_g
            sy = float(s @ y)
            if sy != 0.0:
                step = abs(float(s @ s) / sy)
        step = min(max(step, 1e-10), 1e4)
        accepted = False
        for _ in range(50):
            cand = np.clip(theta + step * g, lo, hi)
            d = cand - theta
            if not np.any(d):
                break
            try:
                fc, _ = objective(cand, False)
            except GprError:
                step *= 0.5
                continue
            if fc >= f + 1e-4 * float(g @ d):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        prev_theta, prev_g = theta, g
        improvement = fc - f
        theta, f = cand, fc
        g = objective(theta, True)[1]
        trace.append(f)
        if improvement < cfg.tol * max(1.0, abs(f)):
            break
    return theta, f, trace


def fit(points, values, cfg: FitConfig | None = None) -> GprModel:
    """Fit hyperparameters by maximum marginal likelihood and condition the GP.

    Each restart starts from a length scale equal to a multiple of the grid
    extent; the restart with the highest log likelihood wins.  The procedure is
    deterministic.
    """
    cfg = cfg or FitConfig()
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if p.shape[0] != v.shape[0]:
        raise ValueError("points and values must have equal length")
    if p.shape[0] < 2 or np.unique(p, axis=0).shape[0] < 2:
        raise ValueError("fit needs at least 2 distinct training points")

    extent = max(float(np.ptp(p[:, 0])), float(np.ptp(p[:, 1])), 1.0)
    sq = kernels.sq_dists(p, p)
    lo = np.log([0.05, 1e-4, cfg.jitter_floor])
    hi = np.log([100.0 * extent, 1e3, 10.0])

    def objective(theta, want_grad):
        return log_marginal_likelihood(GprHyperparams.from_log(theta), p, v, sq=sq,
                                       grad=want_grad)

    best = None
    history = []
    for mult in cfg.initial_multipliers():
        theta0 = np.clip(np.log([mult * extent, cfg.init_signal_variance,
                                 max(cfg.init_noise_variance, cfg.jitter_floor)]), lo, hi)
        try:
            theta, f, trace = _ascend(theta0, lo, hi, objective, cfg)
        except GprError:
            history.append((mult, None, 0))
            continue
        history.append((mult, f, len(trace) - 1))
        if best is None or f > best[1]:
            best = (theta, f)
    if best is None:
        raise GprError("all restarts failed")
    hp = GprHyperparams.from_log(best[0])
    return GprModel.condition(p, v, hp, log_likelihood=best[1], history=tuple(history))


def predict_mean(model: GprModel, queries) -> np.ndarray:
    """Predictive mean ``k_*^T (K + sn2 I)^{-1} v`` at each query point."""
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    if q.shape[0] == 0:
        return np.empty(0)
    kstar = kernel_matrix(q, model.hyperparams, model.train_points)
    return kstar @ model.weights


def predict_var(model: GprModel, queries) -> np.ndarray:
    """Predictive variance of the latent function (noise excluded)."""
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    kstar = kernel_matrix(q, model.hyperparams, model.train_points)
    w = solve_triangular(model.chol, kstar.T, lower=True, check_finite=False)
    return np.maximum(model.hyperparams.signal_variance - np.sum(w * w, axis=0), 0.0)
