"""``sdesample`` command line: synth, sample, predict, sweep, compare, heatmap, replay.

Every command writes its outputs atomically and a ``<output>.manifest`` file
next to the primary output.  The manifest records the fully resolved argument
vector (including the seed), so ``sdesample replay <manifest>`` regenerates
byte-identical outputs.

Manifest schema, one ``key: value`` per line, values JSON-encoded::

    command   subcommand name
    version   package version
    backend   kernel backend (cython | python)
    seed      integer seed used
    argv      resolved argument list, replayable
    config    resolved options (all defaults materialized)
    inputs    input paths
    outputs   output paths
    wall_time seconds (the only field that varies between replays)
"""
from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from sdesample import __version__, kernels
from sdesample._io import atomic_write_text
from sdesample.dataset import DatasetError, filter_faulty, read_csv, to_csv
from sdesample.evaluate import (
    ExperimentReport,
    compare_methods,
    predict_plan,
    rmsd,
    sweep_alpha_beta,
)
from sdesample.gpr import FitConfig, GprError
from sdesample.heatmap import render_svg
from sdesample.sampling import (
    METHODS,
    SamplingConfig,
    SamplingError,
    SdeThresholds,
    parse_plan_csv,
    plan_to_csv,
    sample,
)
from sdesample.synth import (
    FpgaSynthConfig,
    SynthError,
    WaferSynthConfig,
    gen_fpga_devices,
    gen_wafer,
)

MANIFEST_KEYS = ("command", "version", "backend", "seed", "argv", "config", "inputs",
                 "outputs", "wall_time")


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _manifest_path(primary) -> Path:
    return Path(str(primary) + ".manifest")


def write_manifest(path, *, command, seed, argv, config, inputs, outputs, wall_time):
    record = {
        "command": command,
        "version": __version__,
        "backend": kernels.BACKEND,
        "seed": seed,
        "argv": argv,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_time": round(wall_time, 6),
    }
    text = "".join(f"{k}: {json.dumps(record[k], sort_keys=True)}\n" for k in MANIFEST_KEYS)
    atomic_write_text(path, text)


def read_manifest(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            key, sep, value = line.partition(": ")
            if not sep:
                raise CliError("manifest", f"malformed manifest line {line!r}")
            out[key] = json.loads(value)
    if "argv" not in out:
        raise CliError("manifest", "manifest has no argv")
    return out


def _resolve_seed(args) -> int:
    if args.seed is None:
        if args.strict:
            raise CliError("usage", "--seed is required in --strict mode")
        args.seed = secrets.randbits(32)
    return args.seed


def _resolved_argv(args, command, skip=("func", "strict", "command", "kind")) -> list[str]:
    argv = [command] if not getattr(args, "kind", None) else [command, args.kind]
    for key, val in sorted(vars(args).items()):
        if key in skip or val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif isinstance(val, (list, tuple)):
            argv.append(flag)
            argv.extend(str(v) for v in val)
        else:
            argv.extend([flag, str(val)])
    return argv


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _fit_cfg(args) -> FitConfig:
    return FitConfig(restarts=args.restarts, max_iter=args.max_iter, tol=args.tol)


def _sampling_cfg(args) -> SamplingConfig:
    return SamplingConfig(p=args.p, seed=args.seed, strata_count=args.strata,
                          cluster_count=args.clusters)


def _load(path):
    try:
        return read_csv(path)
    except FileNotFoundError:
        raise CliError("io", f"input not found: {path}") from None


def _read_text(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError("io", f"{what} not found: {path}") from None


def cmd_synth(args):
    seed = _resolve_seed(args)
    outputs = []
    out = Path(args.out)
    if args.kind == "wafer":
        base = dict(approx_devices=args.devices, radial_trend_amplitude=args.radial,
                    field_amplitude=args.field_amplitude, field_length_scale=args.length_scale,
                    noise_std=args.noise)
        if args.count == 1:
            d = gen_wafer(WaferSynthConfig(seed=seed, **base), wafer_id=out.stem)
            atomic_write_text(out, to_csv(d))
            outputs.append(out)
        else:
            for i in range(args.count):
                wid = f"wafer-{i + 1:02d}"
                d = gen_wafer(WaferSynthConfig(seed=seed + i, **base), wafer_id=wid)
                path = out / f"{wid}.csv"
                atomic_write_text(path, to_csv(d))
                outputs.append(path)
    else:
        cfg = FpgaSynthConfig(width=args.width, height=args.height, n_points=args.points,
                              n_paths=args.paths, seed=seed, layout_seed=args.layout_seed)
        for device in gen_fpga_devices(cfg, args.fpgas):
            for d in device:
                unit, path_id = d.metadata["unit_id"], d.metadata["path"]
                path = out / f"{unit}_{path_id}.csv"
                atomic_write_text(path, to_csv(d))
                outputs.append(path)
    primary = out if args.count == 1 and args.kind == "wafer" else out / "synth"
    return primary, [], outputs


def cmd_sample(args):
    _resolve_seed(args)
    d = filter_faulty(_load(args.input))
    t = SdeThresholds(args.alpha, args.beta)
    plan = sample(d, args.method, _sampling_cfg(args), t)
    atomic_write_text(args.out, plan_to_csv(plan, d))
    n_primary = int(np.sum(plan.provenance == "primary"))
    print(f"{args.method}: {plan.train_indices.shape[0]} train / {plan.test_indices.shape[0]} test "
          f"({n_primary} primary, {plan.train_indices.shape[0] - n_primary} backfill)")
    return Path(args.out), [args.input], [args.out]


def cmd_predict(args):
    d = filter_faulty(_load(args.input))
    plan = parse_plan_csv(_read_text(args.plan, "plan"), d)
    t0 = time.perf_counter()
    res = predict_plan(d, plan, _fit_cfg(args))
    test = plan.test_indices
    lines = ["x,y,truth,prediction\n"]
    xs, ys, truth = d.x.tolist(), d.y.tolist(), d.value.tolist()
    for i, pred in zip(test.tolist(), res.predicted.tolist()):
        lines.append(f"{xs[i]},{ys[i]},{truth[i]!r},{pred!r}\n")
    atomic_write_text(args.out, "".join(lines))
    raw = rmsd(res.predicted, res.truth)
    hp = res.model.hyperparams
    metrics = Path(args.metrics) if args.metrics else Path(str(args.out) + ".metrics.csv")
    atomic_write_text(metrics, (
        "dataset,method,train_size,test_size,rmsd_raw,rmsd_normalized,"
        "length_scale,signal_variance,noise_variance\n"
        f"{d.name},{plan.method},{plan.train_indices.shape[0]},{test.shape[0]},{raw!r},"
        f"{raw / res.norm.std!r},{hp.length_scale!r},{hp.signal_variance!r},{hp.noise_variance!r}\n"
    ))
    print(f"RMSD {raw:.6g} {d.metadata.get('unit', '')} ({time.perf_counter() - t0:.2f}s)")
    return Path(args.out), [args.input, args.plan], [args.out, metrics]


def cmd_sweep(args):
    _resolve_seed(args)
    d = filter_faulty(_load(args.input))
    res = sweep_alpha_beta(d, _sampling_cfg(args), args.reps, fit_cfg=_fit_cfg(args),
                           workers=args.workers)
    atomic_write_text(args.out, res.to_csv())
    norm_path = Path(str(args.out) + ".normalized.csv")
    atomic_write_text(norm_path, res.to_csv(normalized=True))
    sys.stdout.write(res.to_csv())
    a, b = res.argmin
    print(f"argmin (alpha, beta) = ({a}, {b}) RMSD {res.cells[(a, b)]:.6g}")
    return Path(args.out), [args.input], [args.out, norm_path]


def write_report(report: ExperimentReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    files = {
        "summary.csv": report.summary_csv(),
        "improvements.csv": report.improvements_csv(),
        "units.csv": report.units_csv(),
        "runs.csv": report.runs_csv(),
        "table.txt": report.table(),
    }
    paths = []
    for name, text in files.items():
        atomic_write_text(out_dir / name, text)
        paths.append(out_dir / name)
    return paths


def cmd_compare(args):
    _resolve_seed(args)
    datasets = [filter_faulty(_load(p)) for p in args.input]
    report = compare_methods(datasets, _sampling_cfg(args), SdeThresholds(args.alpha, args.beta),
                             args.reps, fit_cfg=_fit_cfg(args), workers=args.workers)
    paths = write_report(report, args.out_dir)
    sys.stdout.write(report.table())
    return Path(args.out_dir) / "summary.csv", list(args.input), paths


def cmd_heatmap(args):
    d = _load(args.input)
    d = filter_faulty(d) if args.drop_faulty else d
    values = None
    train = None
    if args.plan:
        plan = parse_plan_csv(_read_text(args.plan, "plan"), d)
        train = plan.train_indices
    if args.predictions:
        lookup = {(int(x), int(y)): i for i, (x, y) in enumerate(zip(d.x, d.y))}
        values = d.value.copy()
        with open(args.predictions, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            xi, yi, pi = header.index("x"), header.index("y"), header.index("prediction")
            for line in fh:
                f = line.strip().split(",")
                if len(f) < 3:
                    continue
                key = (int(f[xi]), int(f[yi]))
                if key not in lookup:
                    raise CliError("mismatch", f"prediction at {key} not in dataset")
                values[lookup[key]] = float(f[pi])
    svg = render_svg(d, values=values, train_indices=train, cell=args.cell,
                     title=args.title or d.name)
    atomic_write_text(args.out, svg)
    inputs = [args.input] + [p for p in (args.plan, args.predictions) if p]
    return Path(args.out), inputs, [args.out]


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (drawn from entropy and recorded when omitted)")


def _add_sampling(p):
    p.add_argument("--p", type=float, default=0.1, help="training fraction (default 0.1)")
    p.add_argument("--strata", type=int, default=7, help="quantile strata (default 7)")
    p.add_argument("--clusters", type=int, default=7, help="k-means clusters (default 7)")


def _add_thresholds(p):
    p.add_argument("--alpha", type=int, default=2, help="SDE column gap (default 2)")
    p.add_argument("--beta", type=int, default=2, help="SDE row gap (default 2)")


def _add_fit(p):
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdesample", description=__doc__.split("\n")[0])
    parser.add_argument("--strict", action="store_true", help="require an explicit --seed")
    parser.add_argument("--version", action="version", version=f"sdesample {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic wafer or FPGA datasets")
    p.add_argument("kind", choices=["wafer", "fpga"])
    p.add_argument("--out", required=True,
                   help="CSV path (wafer, --count 1) or output directory")
    _add_seed(p)
    p.add_argument("--count", type=int, default=1, help="number of wafers")
    p.add_argument("--devices", type=int, default=6000, help="approximate dies per wafer")
    p.add_argument("--radial", type=float, default=WaferSynthConfig.radial_trend_amplitude)
    p.add_argument("--field-amplitude", type=float, default=WaferSynthConfig.field_amplitude)
    p.add_argument("--length-scale", type=float, default=WaferSynthConfig.field_length_scale)
    p.add_argument("--noise", type=float, default=WaferSynthConfig.noise_std)
    p.add_argument("--fpgas", type=int, default=1, help="number of FPGA devices")
    p.add_argument("--paths", type=int, default=32)
    p.add_argument("--width", type=int, default=33)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--points", type=int, default=3173)
    p.add_argument("--layout-seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sample", help="select a training set")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=list(METHODS) + ["sde"])
    p.add_argument("--out", required=True)
    _add_seed(p)
    _add_sampling(p)
    _add_thresholds(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("predict", help="fit GPR on a plan's training points, predict the rest")
    p.add_argument("--input", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True, help="predictions CSV")
    p.add_argument("--metrics", default=None, help="metrics CSV (default <out>.metrics.csv)")
    _add_fit(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="(alpha, beta) grid sweep of SDE sampling")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    _add_seed(p)
    _add_sampling(p)
    _add_fit(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="compare the five sampling methods")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    _add_seed(p)
    _add_sampling(p)
    _add_thresholds(p)
    _add_fit(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("heatmap", help="render an SVG heatmap")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plan", default=None, help="outline the plan's training points")
    p.add_argument("--predictions", default=None, help="show predicted values at test points")
    p.add_argument("--cell", type=int, default=6)
    p.add_argument("--title", default=None)
    p.add_argument("--drop-faulty", action="store_true")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=None)
    return parser


def _run(argv, parser):
    args = parser.parse_args(argv)
    if args.command == "replay":
        record = read_manifest(args.manifest)
        return _run(record["argv"], parser)
    start = time.perf_counter()
    primary, inputs, outputs = args.func(args)
    resolved = _resolved_argv(args, args.command)
    if args.strict:
        resolved = ["--strict"] + resolved
    write_manifest(
        _manifest_path(primary), command=args.command, seed=getattr(args, "seed", None),
        argv=resolved, config=_config(args), inputs=inputs, outputs=outputs,
        wall_time=time.perf_counter() - start,
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        return _run(argv, parser)
    except CliError as exc:
        kind, msg = exc.kind, str(exc)
    except DatasetError as exc:
        kind, msg = "dataset", str(exc)
    except SamplingError as exc:
        kind, msg = "sampling", str(exc)
    except SynthError as exc:
        kind, msg = "synth", str(exc)
    except GprError as exc:
        kind, msg = "gpr", str(exc)
    except (OSError, ValueError) as exc:
        kind, msg = type(exc).__name__.lower(), str(exc)
    msg = " ".join(msg.split())
    sys.stderr.write(f"sdesample: error: {kind}: {msg}\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
