"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Both backends are imported
directly, so the ``SDESAMPLE_PURE_PYTHON`` switch does not matter here.  A
full GPR fit is timed under each backend too, to show how much of a real run
the kernels account for.
"""
import argparse
import timeit

import numpy as np

from sdesample import _pykernels

try:
    from sdesample import _ckernels
except ImportError:
    _ckernels = None


def _scan_case(n, target, seed=0):
    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(n)))
    flat = rng.choice(side * side, size=n, replace=False)
    return flat % side, flat // side, rng.permutation(n), target


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _fit_time(module, pts, vals, repeat):
    from sdesample import gpr, kernels

    saved = kernels.rbf_cross, kernels.sq_dists
    kernels.rbf_cross, kernels.sq_dists = module.rbf_cross, module.sq_dists
    try:
        return _best(lambda: gpr.fit(pts, vals), repeat)
    finally:
        kernels.rbf_cross, kernels.sq_dists = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-fit", action="store_true")
    args = ap.parse_args(argv)

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled extension not available; timing the fallback only")

    rng = np.random.default_rng(1)
    a = rng.integers(0, 90, size=(600, 2)).astype(float)
    b = rng.integers(0, 90, size=(5400, 2)).astype(float)
    cases = {
        "sde_scan n=6000 target=600 (2,2)": lambda m: m.sde_scan(*_scan_case(6000, 600), 2, 2),
        "sde_scan n=900 target=90 (1,1)": lambda m: m.sde_scan(*_scan_case(900, 90), 1, 1),
        "rbf_cross 600x600": lambda m: m.rbf_cross(a, a, 5.0, 1.0),
        "rbf_cross 5400x600": lambda m: m.rbf_cross(b, a, 5.0, 1.0),
        "sq_dists 600x600": lambda m: m.sq_dists(a, a),
    }

    print(f"{'case':<36}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, case in cases.items():
        times = [_best(lambda m=m: case(m), args.repeat) for _, m in backends]
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{label:<36}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + speed)

    if not args.skip_fit:
        from sdesample.synth import WaferSynthConfig, gen_wafer

        d = gen_wafer(WaferSynthConfig(approx_devices=3000, seed=0))
        idx = np.random.default_rng(0).choice(len(d), 300, replace=False)
        vals = (d.value[idx] - d.value[idx].mean()) / d.value[idx].std()
        pts = d.coords[idx]
        times = [_fit_time(m, pts, vals, max(1, args.repeat // 2)) for _, m in backends]
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{'gpr.fit M=300':<36}" + "".join(f"{t * 1e3:>10.0f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
