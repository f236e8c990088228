"""Training-set selection strategies.

Five strategies pick ``round(p * N)`` training points from a dataset:

* ``random``      uniform without replacement
* ``stratified``  per value-quantile stratum, ``floor(p * |stratum|)`` each
* ``kmeans``      per 1-D k-means value cluster, ``floor(p * |cluster|)`` each
* ``s-sde``       stratified, with short distance elimination inside each stratum
* ``k-sde``       k-means, with short distance elimination inside each cluster

``sde`` (elimination over the whole dataset) is also available; it is what the
(alpha, beta) sweep evaluates.  Per-group floors under-fill the quota, so every
plan is topped up with uniform draws from the still-unselected points; those
picks are tagged ``backfill``.

Short distance elimination (SDE) visits candidates in a random order and keeps
one only if, against every point kept so far, it differs by at least ``alpha``
columns AND at least ``beta`` rows.  When too few survive, the remainder is drawn
uniformly from the rejected candidates.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from sdesample import kernels
from sdesample.dataset import Dataset

__all__ = [
    "SamplingError",
    "SamplingConfig",
    "SdeThresholds",
    "SamplingPlan",
    "KMeansResult",
    "StratumSpec",
    "PRIMARY",
    "BACKFILL",
    "METHODS",
    "train_size",
    "group_quota",
    "random_sampling",
    "make_strata",
    "stratified_sampling",
    "kmeans_1d",
    "kmeans_sampling",
    "sde_predicate",
    "sde_select",
    "sde_sampling",
    "s_sde",
    "k_sde",
    "sample",
    "plan_to_csv",
    "parse_plan_csv",
]

PRIMARY = "primary"
BACKFILL = "backfill"
_EPS = 1e-9


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    p: float = 0.1
    seed: int = 0
    strata_count: int = 7
    cluster_count: int = 7

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise SamplingError(f"p must lie in (0, 1), got {self.p}")
        if self.strata_count < 1 or self.cluster_count < 1:
            raise SamplingError("strata_count and cluster_count must be >= 1")
        if self.seed < 0:
            raise SamplingError("seed must be non-negative")


@dataclass(frozen=True)
class SdeThresholds:
    alpha: int = 2
    beta: int = 2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise SamplingError("alpha and beta must be non-negative")
        if self.alpha == 0 and self.beta == 0:
            raise SamplingError("alpha and beta cannot both be zero")
        if int(self.alpha) != self.alpha or int(self.beta) != self.beta:
            raise SamplingError("alpha and beta must be integers")


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """Disjoint train/test partition of dataset indices.

    ``provenance`` and ``groups`` are aligned with ``train_indices`` (sorted
    ascending).  ``groups`` holds the stratum/cluster id, or 0 for whole-dataset
    strategies; for SDE strategies every group is one elimination call.
    """

    method: str
    n: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    provenance: np.ndarray
    groups: np.ndarray

    @classmethod
    def build(cls, method: str, n: int, picks, provenance, groups) -> "SamplingPlan":
        picks = np.asarray(picks, dtype=np.int64)
        order = np.argsort(picks, kind="stable")
        train = picks[order]
        if np.unique(train).shape[0] != train.shape[0]:
            raise SamplingError("duplicate training index")
        mask = np.ones(n, dtype=bool)
        mask[train] = False
        prov = np.asarray(provenance, dtype=object)[order]
        grp = np.asarray(groups, dtype=np.int64)[order]
        return cls(method, n, train, np.flatnonzero(mask), prov, grp)

    def __eq__(self, other):
        if not isinstance(other, SamplingPlan):
            return NotImplemented
        return (self.method == other.method and self.n == other.n
                and np.array_equal(self.train_indices, other.train_indices)
                and np.array_equal(self.test_indices, other.test_indices)
                and list(self.provenance) == list(other.provenance)
                and np.array_equal(self.groups, other.groups))

    __hash__ = None

    @property
    def primary_indices(self) -> np.ndarray:
        return self.train_indices[self.provenance == PRIMARY]


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    iterations: int
    inertia: float
    inertia_history: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class StratumSpec:
    boundaries: np.ndarray
    members: tuple[np.ndarray, ...]

    @property
    def labels(self) -> np.ndarray:
        n = sum(m.shape[0] for m in self.members)
        out = np.empty(n, dtype=np.int64)
        for s, idx in enumerate(self.members):
            out[idx] = s
        return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + _EPS))


def train_size(n: int, p: float) -> int:
    """``round(p * n)`` with halves rounded up."""
    return _round_half_up(p * n)


def group_quota(size: int, p: float) -> int:
    """``floor(p * size)``, tolerant of binary round-off (0.1 * 30 -> 3)."""
    return int(math.floor(p * size + _EPS))


def _check_size(n: int, p: float) -> int:
    m = train_size(n, p)
    if m < 1:
        raise SamplingError(f"target training size round({p}*{n}) is 0")
    if m >= n:
        raise SamplingError(f"target training size {m} leaves no test points (N={n})")
    return m


def _streams(seed):
    """Independent generators for grouping (k-means init) and selection."""
    ss = np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def _top_up(n, picks, provenance, groups, target, labels, rng):
    deficit = target - len(picks)
    if deficit <= 0:
        return
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(picks, dtype=np.int64)] = False
    pool = np.flatnonzero(mask)
    extra = rng.choice(pool, size=deficit, replace=False)
    picks.extend(int(i) for i in extra)
    provenance.extend([BACKFILL] * deficit)
    groups.extend(int(labels[i]) for i in extra)


def random_sampling(d: Dataset, cfg: SamplingConfig) -> SamplingPlan:
    n = len(d)
    m = _check_size(n, cfg.p)
    _, rng = _streams(cfg.seed)
    picks = rng.choice(n, size=m, replace=False)
    return SamplingPlan.build("random", n, picks, [PRIMARY] * m, np.zeros(m))


def make_strata(values, s: int) -> StratumSpec:
    """Quantile strata of near-equal size.

    Points are ranked by ``(value, index)`` and the rank sequence is cut into
    ``s`` consecutive runs whose sizes differ by at most one (larger runs first).
    ``boundaries`` are the distinct values at the cut points.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.shape[0]
    if s < 1:
        raise SamplingError("number of strata must be >= 1")
    if n < s:
        raise SamplingError(f"cannot form {s} strata from {n} points")
    order = np.lexsort((np.arange(n), v))
    runs = np.array_split(order, s)
    members = tuple(np.sort(r) for r in runs)
    cuts = [v[r[0]] for r in runs[1:]]
    boundaries = np.unique(np.asarray(cuts, dtype=np.float64))
    return StratumSpec(boundaries, members)


def _grouped_plan(method, d, cfg, groups_members, labels, select, rng):
    n = len(d)
    target = _check_size(n, cfg.p)
    picks, prov, grp = [], [], []
    for g, members in enumerate(groups_members):
        quota = group_quota(members.shape[0], cfg.p)
        if quota == 0:
            continue
        chosen, tags = select(members, quota, rng)
        picks.extend(int(i) for i in chosen)
        prov.extend(tags)
        grp.extend([g] * len(chosen))
    _top_up(n, picks, prov, grp, target, labels, rng)
    return SamplingPlan.build(method, n, picks, prov, grp)


def _uniform_select(members, quota, rng):
    return rng.choice(members, size=quota, replace=False), [PRIMARY] * quota


def stratified_sampling(d: Dataset, cfg: SamplingConfig) -> SamplingPlan:
    strata = make_strata(d.value, cfg.strata_count)
    _, rng = _streams(cfg.seed)
    return _grouped_plan("stratified", d, cfg, strata.members, strata.labels,
                         _uniform_select, rng)


def _kmeanspp(v, k, rng):
    n = v.shape[0]
    centroids = np.empty(k)
    centroids[0] = v[rng.integers(n)]
    d2 = (v - centroids[0]) ** 2
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = v[idx]
        d2 = np.minimum(d2, (v - centroids[j]) ** 2)
    return centroids


def kmeans_1d(values, k: int, seed=0, *, max_iter: int = 100, tol: float = 1e-9) -> KMeansResult:
    """Lloyd's k-means on scalar values with k-means++ seeding.

    Assignment ties go to the lowest cluster index.  An empty cluster is
    re-seeded at the point farthest from its current centroid.  Clusters are
    relabelled in ascending centroid order on return.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.shape[0]
    if k < 1:
        raise SamplingError("k must be >= 1")
    if n < k:
        raise SamplingError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(v, k, rng)

    history = []
    iterations = 0
    while True:
        dist = (v[:, None] - centroids[None, :]) ** 2
        labels = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(n), labels].sum()))
        if iterations >= max_iter:
            break
        iterations += 1
        new = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=v, minlength=k)
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled]
        if not filled.all():
            # points farthest from their own centroid, consumed once each
            own = np.abs(v - new[labels])
            taken = np.zeros(n, dtype=bool)
            for j in np.flatnonzero(~filled):
                cand = np.where(taken, -1.0, own)
                i = int(np.argmax(cand))
                taken[i] = True
                new[j] = v[i]
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        if shift < tol:
            dist = (v[:, None] - centroids[None, :]) ** 2
            labels = np.argmin(dist, axis=1)
            history.append(float(dist[np.arange(n), labels].sum()))
            break

    rank = np.argsort(centroids, kind="stable")
    relabel = np.empty(k, dtype=np.int64)
    relabel[rank] = np.arange(k)
    labels = relabel[labels]
    centroids = centroids[rank]
    inertia = float(np.sum((v - centroids[labels]) ** 2))
    return KMeansResult(labels, centroids, iterations, inertia, tuple(history))


def _clusters(d: Dataset, cfg: SamplingConfig, rng):
    km = kmeans_1d(d.value, cfg.cluster_count, rng)
    members = tuple(np.flatnonzero(km.labels == j) for j in range(cfg.cluster_count))
    return km, members


def kmeans_sampling(d: Dataset, cfg: SamplingConfig) -> SamplingPlan:
    rng_group, rng = _streams(cfg.seed)
    km, members = _clusters(d, cfg, rng_group)
    return _grouped_plan("kmeans", d, cfg, members, km.labels, _uniform_select, rng)


def sde_predicate(a, b, t: SdeThresholds) -> bool:
    """True iff the two grid points are at least (alpha, beta) apart on both axes."""
    return abs(int(a[0]) - int(b[0])) >= t.alpha and abs(int(a[1]) - int(b[1])) >= t.beta


def sde_select(xs, ys, target: int, t: SdeThresholds, rng):
    """Short distance elimination over a candidate pool.

    Parameters
    ----------
    xs, ys : array_like of int
        Pool coordinates.
    target : int
        Number of points to return.
    t : SdeThresholds
    rng : numpy Generator or seed

    Returns
    -------
    selected : ndarray of int64
        Pool positions; phase-1 acceptances first (in acceptance order), then
        backfill draws.
    provenance : list of str
        ``"primary"`` or ``"backfill"`` per selected position.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    n = xs.shape[0]
    if target > n:
        raise SamplingError(f"target {target} exceeds pool size {n}")
    rng = np.random.default_rng(rng)
    if target <= 0:
        return np.empty(0, dtype=np.int64), []
    order = rng.permutation(n)
    accepted, rejected = kernels.sde_scan(xs, ys, order, target, int(t.alpha), int(t.beta))
    deficit = target - accepted.shape[0]
    prov = [PRIMARY] * accepted.shape[0]
    if deficit > 0:
        extra = rejected[rng.choice(rejected.shape[0], size=deficit, replace=False)]
        accepted = np.concatenate([accepted, extra])
        prov += [BACKFILL] * deficit
    return accepted, prov


def _sde_group_select(d: Dataset, t: SdeThresholds):
    def select(members, quota, rng):
        pos, prov = sde_select(d.x[members], d.y[members], quota, t, rng)
        return members[pos], prov
    return select


def sde_sampling(d: Dataset, cfg: SamplingConfig, t: SdeThresholds) -> SamplingPlan:
    """Elimination over the whole dataset with target ``round(p * N)``."""
    n = len(d)
    target = _check_size(n, cfg.p)
    _, rng = _streams(cfg.seed)
    pos, prov = sde_select(d.x, d.y, target, t, rng)
    return SamplingPlan.build("sde", n, pos, prov, np.zeros(target))


def s_sde(d: Dataset, cfg: SamplingConfig, t: SdeThresholds) -> SamplingPlan:
    strata = make_strata(d.value, cfg.strata_count)
    _, rng = _streams(cfg.seed)
    return _grouped_plan("s-sde", d, cfg, strata.members, strata.labels,
                         _sde_group_select(d, t), rng)


def k_sde(d: Dataset, cfg: SamplingConfig, t: SdeThresholds) -> SamplingPlan:
    rng_group, rng = _streams(cfg.seed)
    km, members = _clusters(d, cfg, rng_group)
    return _grouped_plan("k-sde", d, cfg, members, km.labels, _sde_group_select(d, t), rng)


METHODS = ("random", "stratified", "kmeans", "s-sde", "k-sde")
_ALL_METHODS = METHODS + ("sde",)


def sample(d: Dataset, method: str, cfg: SamplingConfig,
           t: SdeThresholds | None = None) -> SamplingPlan:
    """Dispatch by method name (``random``, ``stratified``, ``kmeans``, ``s-sde``, ``k-sde``, ``sde``)."""
    if method not in _ALL_METHODS:
        raise SamplingError(f"unknown method {method!r}; expected one of {', '.join(_ALL_METHODS)}")
    t = t or SdeThresholds()
    if method == "random":
        return random_sampling(d, cfg)
    if method == "stratified":
        return stratified_sampling(d, cfg)
    if method == "kmeans":
        return kmeans_sampling(d, cfg)
    if method == "s-sde":
        return s_sde(d, cfg, t)
    if method == "k-sde":
        return k_sde(d, cfg, t)
    return sde_sampling(d, cfg, t)


def plan_to_csv(plan: SamplingPlan, d: Dataset) -> str:
    """CSV with one row per dataset point: index, x, y, role, provenance, group."""
    if len(d) != plan.n:
        raise SamplingError("plan and dataset sizes differ")
    role = np.array(["test"] * plan.n, dtype=object)
    prov = np.array([""] * plan.n, dtype=object)
    grp = np.array([""] * plan.n, dtype=object)
    role[plan.train_indices] = "train"
    prov[plan.train_indices] = plan.provenance
    grp[plan.train_indices] = [str(g) for g in plan.groups]
    out = io.StringIO()
    out.write(f"# meta: method={plan.method}\n")
    out.write("index,x,y,role,provenance,group\n")
    for i in range(plan.n):
        out.write(f"{i},{d.x[i]},{d.y[i]},{role[i]},{prov[i]},{grp[i]}\n")
    return out.getvalue()


def parse_plan_csv(text: str, d: Dataset | None = None) -> SamplingPlan:
    """Inverse of :func:`plan_to_csv`; validates against ``d`` when given."""
    method = "unknown"
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if body.startswith("meta:") and "method=" in body:
                method = body.split("method=", 1)[1].strip()
            continue
        rows.append(s.split(","))
    if not rows or rows[0][:4] != ["index", "x", "y", "role"]:
        raise SamplingError("plan CSV must start with header index,x,y,role,provenance,group")
    body = rows[1:]
    n = len(body)
    picks, prov, grp = [], [], []
    seen = set()
    for r in body:
        try:
            i, x, y = int(r[0]), int(r[1]), int(r[2])
        except (ValueError, IndexError):
            raise SamplingError(f"malformed plan row {','.join(r)!r}") from None
        if i < 0 or i >= n or i in seen:
            raise SamplingError(f"plan index {i} out of range or repeated (N={n})")
        seen.add(i)
        if d is not None:
            if i >= len(d):
                raise SamplingError(f"plan index {i} out of range for dataset of size {len(d)}")
            if (d.x[i], d.y[i]) != (x, y):
                raise SamplingError(f"plan row {i} coordinate ({x}, {y}) does not match dataset")
        if r[3] == "train":
            picks.append(i)
            prov.append(r[4] if len(r) > 4 and r[4] else PRIMARY)
            grp.append(int(r[5]) if len(r) > 5 and r[5] else 0)
        elif r[3] != "test":
            raise SamplingError(f"unknown role {r[3]!r}")
    if d is not None and n != len(d):
        raise SamplingError(f"plan covers {n} points but dataset has {len(d)}")
    return SamplingPlan.build(method, n, picks, prov, grp)
