"""Experiment engine: sample, fit, predict, score; (alpha, beta) sweeps; method comparison.

One pipeline run samples a training set, standardizes values with statistics
of the training points only, fits the GP on the training set and scores the
predictive mean on the held-out points by RMSD in raw and standardized units.
"""
from __future__ import annotations

import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from sdesample import gpr
from sdesample.dataset import Dataset, NormParams, filter_faulty, fit_norm
from sdesample.sampling import (
    METHODS,
    SamplingConfig,
    SamplingError,
    SamplingPlan,
    SdeThresholds,
    sample,
)

__all__ = [
    "rmsd",
    "improvement_pct",
    "RunResult",
    "Prediction",
    "predict_plan",
    "run_pipeline",
    "SweepResult",
    "sweep_alpha_beta",
    "ExperimentReport",
    "compare_methods",
    "SWEEP_VALUES",
]

SWEEP_VALUES = (0, 1, 2, 3, 4)


def rmsd(pred, truth) -> float:
    """Root-mean-square deviation between equal-length vectors."""
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} truths")
    if p.shape[0] == 0:
        raise ValueError("rmsd of empty input")
    diff = p - t
    return float(math.sqrt(float(diff @ diff) / diff.shape[0]))


def improvement_pct(baseline: float, improved: float) -> float:
    """Relative RMSD reduction ``(baseline - improved) / baseline * 100``."""
    if baseline == 0:
        raise ValueError("baseline RMSD is zero")
    return (baseline - improved) / baseline * 100.0


@dataclass(frozen=True)
class RunResult:
    dataset_id: str
    method: str
    seed: int
    rmsd_raw: float
    rmsd_normalized: float
    train_size: int
    hyperparams: gpr.GprHyperparams
    wall_time: float = field(default=0.0, compare=False)
    family: str = ""
    unit_id: str = ""


@dataclass(frozen=True, eq=False)
class Prediction:
    plan: SamplingPlan
    norm: NormParams
    model: gpr.GprModel
    predicted: np.ndarray
    truth: np.ndarray


def predict_plan(d: Dataset, plan: SamplingPlan, fit_cfg: gpr.FitConfig | None = None) -> Prediction:
    """Fit on the plan's training points and predict its test points (raw units)."""
    if plan.n != len(d):
        raise SamplingError(f"plan size {plan.n} does not match dataset size {len(d)}")
    train = plan.train_indices
    test = plan.test_indices
    if train.shape[0] == 0 or test.shape[0] == 0:
        raise SamplingError("plan needs both training and test points")
    if train.max() >= len(d) or test.max() >= len(d):
        raise SamplingError("plan index out of range")
    norm = fit_norm(d.value[train])
    coords = d.coords
    model = gpr.fit(coords[train], norm.apply(d.value[train]), fit_cfg)
    pred = norm.invert(gpr.predict_mean(model, coords[test]))
    return Prediction(plan, norm, model, pred, d.value[test].copy())


def run_pipeline(d: Dataset, method: str, cfg: SamplingConfig | None = None,
                 t: SdeThresholds | None = None, seed: int | None = None,
                 fit_cfg: gpr.FitConfig | None = None) -> RunResult:
    """Sample -> standardize on train -> fit -> predict test -> RMSD.

    Faulty points are dropped first.  ``seed`` overrides ``cfg.seed``.
    """
    start = time.perf_counter()
    cfg = cfg or SamplingConfig()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    d = filter_faulty(d)
    plan = sample(d, method, cfg, t)
    out = predict_plan(d, plan, fit_cfg)
    raw = rmsd(out.predicted, out.truth)
    return RunResult(
        dataset_id=d.name,
        method=method,
        seed=cfg.seed,
        rmsd_raw=raw,
        rmsd_normalized=raw / out.norm.std,
        train_size=int(plan.train_indices.shape[0]),
        hyperparams=out.model.hyperparams,
        wall_time=time.perf_counter() - start,
        family=d.metadata.get("family", ""),
        unit_id=d.metadata.get("unit_id", d.name),
    )


def _run_job(job):
    d, method, cfg, t, seed, fit_cfg = job
    return run_pipeline(d, method, cfg, t, seed, fit_cfg)


def _run_all(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Mean RMSD over an (alpha, beta) grid; cell (0, 0) is undefined (NaN)."""

    alphas: tuple[int, ...]
    betas: tuple[int, ...]
    mean_rmsd: np.ndarray
    mean_rmsd_normalized: np.ndarray
    reps: int
    runs: tuple[RunResult, ...] = ()

    @property
    def cells(self) -> dict[tuple[int, int], float]:
        return {
            (a, b): float(self.mean_rmsd[i, j])
            for i, a in enumerate(self.alphas)
            for j, b in enumerate(self.betas)
            if not (a == 0 and b == 0)
        }

    @property
    def argmin(self) -> tuple[int, int]:
        cells = self.cells
        return min(cells, key=lambda k: (cells[k], k))

    def to_csv(self, normalized: bool = False) -> str:
        """Grid with alpha rows and beta columns; the (0, 0) cell is written as an em dash."""
        grid = self.mean_rmsd_normalized if normalized else self.mean_rmsd
        out = io.StringIO()
        out.write("alpha\\beta," + ",".join(str(b) for b in self.betas) + "\n")
        for i, a in enumerate(self.alphas):
            row = [str(a)]
            for j, b in enumerate(self.betas):
                row.append("—" if (a == 0 and b == 0) else repr(float(grid[i, j])))
            out.write(",".join(row) + "\n")
        return out.getvalue()


def sweep_alpha_beta(d: Dataset, cfg: SamplingConfig | None = None, reps: int = 5, *,
                     values=SWEEP_VALUES, fit_cfg: gpr.FitConfig | None = None,
                     workers: int = 1) -> SweepResult:
    """SDE-only pipeline over every (alpha, beta) pair except (0, 0).

    Each cell averages ``reps`` runs with seeds ``cfg.seed + r``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cfg = cfg or SamplingConfig()
    values = tuple(int(v) for v in values)
    cells = [(a, b) for a in values for b in values if not (a == 0 and b == 0)]
    jobs = [
        (d, "sde", cfg, SdeThresholds(a, b), cfg.seed + r, fit_cfg)
        for a, b in cells
        for r in range(reps)
    ]
    runs = _run_all(jobs, workers)
    raw = np.full((len(values), len(values)), np.nan)
    norm = np.full_like(raw, np.nan)
    for c, (a, b) in enumerate(cells):
        chunk = runs[c * reps:(c + 1) * reps]
        i, j = values.index(a), values.index(b)
        raw[i, j] = float(np.mean([r.rmsd_raw for r in chunk]))
        norm[i, j] = float(np.mean([r.rmsd_normalized for r in chunk]))
    return SweepResult(values, values, raw, norm, reps, tuple(runs))


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Per-run results plus aggregate views.

    Aggregates are plain means over runs, reduced in (dataset, method, seed)
    order so totals are reproducible.
    """

    runs: tuple[RunResult, ...]
    methods: tuple[str, ...] = METHODS

    def _mean(self, key, select, metric="rmsd_raw"):
        out: dict = {}
        for r in self.runs:
            out.setdefault((key(r), r.method), []).append(getattr(r, metric))
        return {k: float(np.mean(v)) for k, v in out.items() if select(k)}

    def family_means(self, metric: str = "rmsd_raw") -> dict[tuple[str, str], float]:
        return self._mean(lambda r: r.family or "default", lambda k: True, metric)

    def unit_means(self, metric: str = "rmsd_raw") -> dict[tuple[str, str], float]:
        return self._mean(lambda r: r.unit_id, lambda k: True, metric)

    def dataset_means(self, metric: str = "rmsd_raw") -> dict[tuple[str, str], float]:
        return self._mean(lambda r: r.dataset_id, lambda k: True, metric)

    @property
    def families(self) -> list[str]:
        return list(dict.fromkeys(r.family or "default" for r in self.runs))

    def improvements(self, metric: str = "rmsd_raw") -> dict[tuple[str, str], float]:
        """``{(family, 'k-sde_vs_kmeans' | 's-sde_vs_stratified'): percent}``."""
        means = self.family_means(metric)
        out = {}
        for fam in self.families:
            for new, base in (("k-sde", "kmeans"), ("s-sde", "stratified")):
                if (fam, new) in means and (fam, base) in means:
                    out[(fam, f"{new}_vs_{base}")] = improvement_pct(
                        means[(fam, base)], means[(fam, new)])
        return out

    def summary_csv(self) -> str:
        raw = self.family_means("rmsd_raw")
        nrm = self.family_means("rmsd_normalized")
        counts: dict = {}
        for r in self.runs:
            key = (r.family or "default", r.method)
            counts[key] = counts.get(key, 0) + 1
        out = io.StringIO()
        out.write("family,method,mean_rmsd_raw,mean_rmsd_normalized,runs\n")
        for fam in self.families:
            for m in self.methods:
                if (fam, m) in raw:
                    out.write(f"{fam},{m},{raw[(fam, m)]!r},{nrm[(fam, m)]!r},{counts[(fam, m)]}\n")
        return out.getvalue()

    def improvements_csv(self) -> str:
        out = io.StringIO()
        out.write("family,comparison,baseline_mean,improved_mean,improvement_pct,"
                  "improvement_pct_normalized\n")
        raw = self.family_means("rmsd_raw")
        imp = self.improvements("rmsd_raw")
        imp_n = self.improvements("rmsd_normalized")
        for (fam, comp), pct in imp.items():
            new, base = comp.split("_vs_")
            out.write(f"{fam},{comp},{raw[(fam, base)]!r},{raw[(fam, new)]!r},{pct!r},"
                      f"{imp_n[(fam, comp)]!r}\n")
        return out.getvalue()

    def units_csv(self) -> str:
        raw = self.unit_means("rmsd_raw")
        nrm = self.unit_means("rmsd_normalized")
        fam_of = {r.unit_id: r.family or "default" for r in self.runs}
        out = io.StringIO()
        out.write("family,unit,method,mean_rmsd_raw,mean_rmsd_normalized\n")
        for unit in dict.fromkeys(r.unit_id for r in self.runs):
            for m in self.methods:
                if (unit, m) in raw:
                    out.write(f"{fam_of[unit]},{unit},{m},{raw[(unit, m)]!r},{nrm[(unit, m)]!r}\n")
        return out.getvalue()

    def runs_csv(self) -> str:
        out = io.StringIO()
        out.write("family,unit,dataset,method,seed,train_size,rmsd_raw,rmsd_normalized,"
                  "length_scale,signal_variance,noise_variance\n")
        for r in self.runs:
            hp = r.hyperparams
            out.write(f"{r.family},{r.unit_id},{r.dataset_id},{r.method},{r.seed},{r.train_size},"
                      f"{r.rmsd_raw!r},{r.rmsd_normalized!r},{hp.length_scale!r},"
                      f"{hp.signal_variance!r},{hp.noise_variance!r}\n")
        return out.getvalue()

    def table(self) -> str:
        """Human-readable mean-RMSD table, one column per family."""
        raw = self.family_means("rmsd_raw")
        fams = self.families
        lines = ["method".ljust(12) + "".join(f"{f + ' RMSD':>16}" for f in fams)]
        for m in self.methods:
            cells = "".join(f"{raw[(f, m)]:>16.5f}" if (f, m) in raw else " " * 16 for f in fams)
            lines.append(m.ljust(12) + cells)
        for (fam, comp), pct in self.improvements().items():
            lines.append(f"{fam}: {comp} {pct:+.2f}%")
        return "\n".join(lines) + "\n"


def compare_methods(datasets, cfg: SamplingConfig | None = None, t: SdeThresholds | None = None,
                    reps: int = 1, *, methods=METHODS, fit_cfg: gpr.FitConfig | None = None,
                    workers: int = 1) -> ExperimentReport:
    """Run every method on every dataset for seeds ``cfg.seed + 0 .. reps - 1``."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("compare_methods needs at least one dataset")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cfg = cfg or SamplingConfig()
    t = t or SdeThresholds()
    jobs = [
        (d, m, cfg, t, cfg.seed + r, fit_cfg)
        for d in datasets
        for m in methods
        for r in range(reps)
    ]
    return ExperimentReport(tuple(_run_all(jobs, workers)), tuple(methods))
