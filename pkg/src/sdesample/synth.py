"""Synthetic wafer maps and FPGA ring-oscillator grids.

Real production data is proprietary; these generators reproduce its shape:
a circular wafer of roughly 6000 dies with a radial bias, and a 33 x 120 FPGA
fabric with 3173 occupied cells measured under 32 LUT paths.  Smooth spatial
variation is drawn from an RBF Gaussian process on a coarse lattice and
bilinearly interpolated to the cell grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky

from sdesample import kernels
from sdesample.dataset import Dataset

__all__ = [
    "SynthError",
    "WaferSynthConfig",
    "FpgaSynthConfig",
    "disk_mask",
    "smooth_field",
    "gen_wafer",
    "gen_fpga",
    "gen_fpga_devices",
]


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class WaferSynthConfig:
    approx_devices: int = 6000
    radial_trend_amplitude: float = 1.0
    field_amplitude: float = 1.0
    field_length_scale: float = 8.0
    noise_std: float = 0.1
    base_level: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.approx_devices < 100:
            raise SynthError("approx_devices must be >= 100")
        if not self.field_length_scale > 0:
            raise SynthError("field_length_scale must be > 0")
        if self.noise_std < 0 or self.field_amplitude < 0:
            raise SynthError("noise_std and field_amplitude must be >= 0")


@dataclass(frozen=True)
class FpgaSynthConfig:
    width: int = 33
    height: int = 120
    n_points: int = 3173
    n_paths: int = 32
    field_amplitude: float = 4.0
    field_length_scale: float = 10.0
    path_offset_std: float = 2.0
    noise_std: float = 0.5
    base_level: float = 250.0
    seed: int = 0
    layout_seed: int = 0

    def __post_init__(self):
        if min(self.width, self.height, self.n_points, self.n_paths) < 1:
            raise SynthError("width, height, n_points and n_paths must be positive")
        if self.n_points > self.width * self.height:
            raise SynthError(
                f"n_points={self.n_points} exceeds grid capacity {self.width * self.height}"
            )
        if not self.field_length_scale > 0:
            raise SynthError("field_length_scale must be > 0")


def disk_mask(diameter: int) -> np.ndarray:
    """Boolean (D, D) mask of cells whose centres lie inside the inscribed circle."""
    c = (np.arange(diameter) + 0.5 - diameter / 2.0) ** 2
    return (c[:, None] + c[None, :]) <= (diameter / 2.0) ** 2


def _wafer_diameter(n: int) -> tuple[int, np.ndarray]:
    guess = int(round(math.sqrt(4.0 * n / math.pi)))
    best = None
    for d in range(max(2, guess - 3), guess + 4):
        m = disk_mask(d)
        err = abs(int(m.sum()) - n)
        if best is None or err < best[0]:
            best = (err, d, m)
    err, d, m = best
    if err > 0.05 * n:
        raise SynthError(f"cannot place ~{n} devices on a disk grid (closest {int(m.sum())})")
    return d, m


def smooth_field(width: int, height: int, length_scale: float, rng: np.random.Generator,
                 max_nodes: int = 2500) -> np.ndarray:
    """Unit-variance RBF-GP field on a (width, height) grid, indexed ``[x, y]``.

    The GP is sampled exactly on a coarse lattice with spacing ``length_scale/2``
    (widened if needed to stay under ``max_nodes``) and bilinearly interpolated.
    """
    spacing = length_scale / 2.0
    while True:
        nx = int(math.ceil((width - 1) / spacing)) + 2
        ny = int(math.ceil((height - 1) / spacing)) + 2
        if nx * ny <= max_nodes:
            break
        spacing *= 1.25
    gx = np.arange(nx) * spacing
    gy = np.arange(ny) * spacing
    nodes = np.column_stack([np.repeat(gx, ny), np.tile(gy, nx)])
    cov = kernels.rbf_cross(nodes, nodes, length_scale, 1.0)
    jitter = 1e-8
    while True:
        try:
            chol = cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > 1e-2:
                raise
    coarse = (chol @ rng.standard_normal(cov.shape[0])).reshape(nx, ny)

    fx = np.arange(width) / spacing
    fy = np.arange(height) / spacing
    ix = np.minimum(fx.astype(np.int64), nx - 2)
    iy = np.minimum(fy.astype(np.int64), ny - 2)
    tx = (fx - ix)[:, None]
    ty = (fy - iy)[None, :]
    c00 = coarse[ix[:, None], iy[None, :]]
    c10 = coarse[ix[:, None] + 1, iy[None, :]]
    c01 = coarse[ix[:, None], iy[None, :] + 1]
    c11 = coarse[ix[:, None] + 1, iy[None, :] + 1]
    return (c00 * (1 - tx) * (1 - ty) + c10 * tx * (1 - ty)
            + c01 * (1 - tx) * ty + c11 * tx * ty)


def gen_wafer(cfg: WaferSynthConfig, *, wafer_id: str | None = None) -> Dataset:
    """Synthetic wafer map: base + quadratic radial trend + smooth field + noise."""
    rng = np.random.default_rng(cfg.seed)
    d, mask = _wafer_diameter(cfg.approx_devices)
    xs, ys = np.nonzero(mask)
    centre = (d - 1) / 2.0
    r2 = ((xs - centre) ** 2 + (ys - centre) ** 2) / (d / 2.0) ** 2
    field = smooth_field(d, d, cfg.field_length_scale, rng)[xs, ys]
    noise = rng.standard_normal(xs.shape[0])
    values = (cfg.base_level + cfg.radial_trend_amplitude * r2
              + cfg.field_amplitude * field + cfg.noise_std * noise)
    meta = {
        "source": wafer_id or f"wafer-seed{cfg.seed}",
        "family": "wafer",
        "unit_id": wafer_id or f"wafer-seed{cfg.seed}",
        "measurement": "dynamic_current",
        "unit": "mA",
    }
    return Dataset(xs, ys, values, grid_x0=0, grid_y0=0, grid_width=d, grid_height=d,
                   metadata=meta)


def _fpga_layout(cfg: FpgaSynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Occupied cell mask (width, height): a few empty hard-block columns, then random gaps."""
    occ = np.ones((cfg.width, cfg.height), dtype=bool)
    spare = cfg.width * cfg.height - cfg.n_points
    col_cap = spare // (2 * cfg.height)
    if col_cap > 0 and cfg.width > 2:
        cols = rng.choice(np.arange(1, cfg.width - 1), size=min(col_cap, cfg.width - 2),
                          replace=False)
        occ[np.sort(cols), :] = False
    free = np.flatnonzero(occ.ravel())
    extra = int(occ.sum()) - cfg.n_points
    if extra > 0:
        occ.ravel()[rng.choice(free, size=extra, replace=False)] = False
    return occ


def gen_fpga(cfg: FpgaSynthConfig, *, device_id: str = "fpga-01") -> list[Dataset]:
    """One dataset per LUT path on a shared layout and shared spatial field.

    The occupancy layout depends only on ``layout_seed``, so devices generated
    with different ``seed`` values share the same placement.
    """
    occ = _fpga_layout(cfg, np.random.default_rng(cfg.layout_seed))
    rng = np.random.default_rng(cfg.seed)
    xs, ys = np.nonzero(occ)
    shared = smooth_field(cfg.width, cfg.height, cfg.field_length_scale, rng)[xs, ys]
    out = []
    for p in range(cfg.n_paths):
        offset = cfg.path_offset_std * rng.standard_normal()
        noise = rng.standard_normal(xs.shape[0])
        values = cfg.base_level + offset + cfg.field_amplitude * shared + cfg.noise_std * noise
        path_id = f"path-{p + 1:02d}"
        meta = {
            "source": f"{device_id}/{path_id}",
            "family": "fpga",
            "unit_id": device_id,
            "path": path_id,
            "measurement": "ro_frequency",
            "unit": "MHz",
        }
        out.append(Dataset(xs, ys, values, grid_x0=0, grid_y0=0, grid_width=cfg.width,
                           grid_height=cfg.height, metadata=meta))
    return out


def gen_fpga_devices(cfg: FpgaSynthConfig, n_devices: int = 5) -> list[list[Dataset]]:
    """Several independent devices; device ``i`` uses seed ``cfg.seed + i``."""
    if n_devices < 1:
        raise SynthError("n_devices must be >= 1")
    devices = []
    for i in range(n_devices):
        sub = FpgaSynthConfig(**{**cfg.__dict__, "seed": cfg.seed + i})
        devices.append(gen_fpga(sub, device_id=f"fpga-{i + 1:02d}"))
    return devices
