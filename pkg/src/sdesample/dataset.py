"""Grid measurement datasets: CSV ingestion, faulty-point filtering, normalization.

A dataset is an ordered collection of ``(x, y, value, valid)`` points on an
integer grid (one die per wafer cell, one ring oscillator per FPGA cell).
Values are standardized with the population (divide-by-N) standard deviation.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np

__all__ = [
    "DatasetError",
    "SpatialSample",
    "Dataset",
    "NormParams",
    "DEFAULT_SCHEMA",
    "parse_csv",
    "read_csv",
    "to_csv",
    "write_csv",
    "filter_faulty",
    "normalize_values",
    "fit_norm",
]

DEFAULT_SCHEMA = {"x": "x", "y": "y", "value": "value", "valid": "valid"}

_TRUE = {"1", "true", "t", "yes", "y", "pass", "p"}
_FALSE = {"0", "false", "f", "no", "n", "fail"}

# Metadata keys that carry explicit grid extents.
_GRID_KEYS = ("grid_x0", "grid_y0", "grid_width", "grid_height")


class DatasetError(ValueError):
    """Invalid dataset input or a violated dataset invariant."""


@dataclass(frozen=True)
class SpatialSample:
    x: int
    y: int
    value: float
    valid: bool = True


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated, immutable collection of grid measurements.

    Parameters
    ----------
    x, y : array_like of int
        Grid coordinates.
    value : array_like of float
        Measurements; must be finite wherever ``valid`` is true.
    valid : array_like of bool, optional
        Pass/fail flag per point. Defaults to all true.
    grid_width, grid_height : int, optional
        Grid extents. Inferred from the coordinate range when omitted.
    grid_x0, grid_y0 : int, optional
        Lower grid bound. Defaults to the minimum observed coordinate.
    metadata : mapping, optional
        Free-form string metadata (``source``, ``measurement``, ``unit``, ...).
    """

    x: np.ndarray
    y: np.ndarray
    value: np.ndarray
    valid: np.ndarray
    grid_x0: int
    grid_y0: int
    grid_width: int
    grid_height: int
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __init__(self, x, y, value, valid=None, *, grid_width=None, grid_height=None,
                 grid_x0=None, grid_y0=None, metadata=None):
        x = np.array(x, dtype=np.int64).reshape(-1)
        y = np.array(y, dtype=np.int64).reshape(-1)
        value = np.array(value, dtype=np.float64).reshape(-1)
        n = x.shape[0]
        if valid is None:
            valid = np.ones(n, dtype=bool)
        else:
            valid = np.array(valid, dtype=bool).reshape(-1)
        if not (y.shape[0] == value.shape[0] == valid.shape[0] == n):
            raise DatasetError("x, y, value and valid must have equal length")
        if n == 0:
            raise DatasetError("dataset is empty")

        bad = valid & ~np.isfinite(value)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DatasetError(f"non-finite value at sample {i}")

        key = (x - x.min()) * (int(y.max() - y.min()) + 1) + (y - y.min())
        uniq, counts = np.unique(key, return_counts=True)
        if (counts > 1).any():
            dup = uniq[counts > 1][0]
            i = int(np.flatnonzero(key == dup)[0])
            raise DatasetError(f"duplicate coordinate ({x[i]}, {y[i]})")

        x0 = int(x.min()) if grid_x0 is None else int(grid_x0)
        y0 = int(y.min()) if grid_y0 is None else int(grid_y0)
        w = int(x.max()) - x0 + 1 if grid_width is None else int(grid_width)
        h = int(y.max()) - y0 + 1 if grid_height is None else int(grid_height)
        if w <= 0 or h <= 0:
            raise DatasetError("grid extents must be positive")
        if x.min() < x0 or x.max() >= x0 + w or y.min() < y0 or y.max() >= y0 + h:
            raise DatasetError("coordinates outside the declared grid bounds")

        for arr in (x, y, value, valid):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "grid_x0", x0)
        object.__setattr__(self, "grid_y0", y0)
        object.__setattr__(self, "grid_width", w)
        object.__setattr__(self, "grid_height", h)
        object.__setattr__(self, "metadata", dict(metadata or {}))

    def __len__(self):
        return int(self.x.shape[0])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.value, other.value, equal_nan=True)
            and self.grid_bounds == other.grid_bounds
            and dict(self.metadata) == dict(other.metadata)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self)

    @property
    def grid_bounds(self):
        return (self.grid_x0, self.grid_y0, self.grid_width, self.grid_height)

    @property
    def coords(self) -> np.ndarray:
        """(N, 2) float array of grid coordinates."""
        return np.column_stack([self.x, self.y]).astype(np.float64)

    @property
    def samples(self) -> list[SpatialSample]:
        return [
            SpatialSample(int(a), int(b), float(v), bool(ok))
            for a, b, v, ok in zip(self.x, self.y, self.value, self.valid)
        ]

    @property
    def name(self) -> str:
        return self.metadata.get("source", "dataset")

    @classmethod
    def from_samples(cls, samples: Iterable[SpatialSample], **kwargs) -> "Dataset":
        samples = list(samples)
        return cls(
            [s.x for s in samples],
            [s.y for s in samples],
            [s.value for s in samples],
            [s.valid for s in samples],
            **kwargs,
        )

    def replace(self, *, value=None, valid=None, metadata=None, index=None) -> "Dataset":
        """Copy with new values/flags/metadata, optionally restricted to ``index``."""
        x, y = self.x, self.y
        v = self.value if value is None else value
        ok = self.valid if valid is None else valid
        if index is not None:
            x, y, v, ok = x[index], y[index], np.asarray(v)[index], np.asarray(ok)[index]
        return Dataset(
            x, y, v, ok,
            grid_x0=self.grid_x0, grid_y0=self.grid_y0,
            grid_width=self.grid_width, grid_height=self.grid_height,
            metadata=self.metadata if metadata is None else metadata,
        )


@dataclass(frozen=True)
class NormParams:
    """Affine standardization ``(v - mean) / std``."""

    mean: float
    std: float

    def __post_init__(self):
        if not (self.std > 0 and math.isfinite(self.std) and math.isfinite(self.mean)):
            raise DatasetError(f"invalid normalization std={self.std!r}")

    def apply(self, values):
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def invert(self, values):
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


def fit_norm(values) -> NormParams:
    """Population mean/std of ``values``; raises on fewer than 2 points or zero variance."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        raise DatasetError("normalization needs at least 2 values")
    mean = float(v.mean())
    std = float(np.sqrt(np.mean((v - mean) ** 2)))
    if not std > 0 or std <= 1e-14 * max(1.0, abs(mean)):
        raise DatasetError("zero variance: all values are equal")
    return NormParams(mean, std)


def normalize_values(d: Dataset) -> tuple[Dataset, NormParams]:
    """Standardize values to mean 0 and population std 1."""
    params = fit_norm(d.value)
    return d.replace(value=params.apply(d.value)), params


def filter_faulty(d: Dataset) -> Dataset:
    """Drop points flagged invalid, preserving order."""
    if d.valid.all():
        return d
    keep = np.flatnonzero(d.valid)
    if keep.shape[0] < 2:
        raise DatasetError(f"only {keep.shape[0]} valid samples remain; need at least 2")
    return d.replace(index=keep)


def _parse_bool(text: str, row: int, col: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise DatasetError(f"row {row}, column {col!r}: cannot parse flag {text!r}")


def _parse_int(text: str, row: int, col: str) -> int:
    try:
        f = float(text)
    except ValueError:
        raise DatasetError(f"row {row}, column {col!r}: malformed number {text!r}") from None
    if not math.isfinite(f) or f != int(f):
        raise DatasetError(f"row {row}, column {col!r}: expected an integer, got {text!r}")
    return int(f)


def parse_csv(stream: IO | str | bytes, schema: Mapping[str, str | None] | None = None,
              *, source: str | None = None) -> Dataset:
    """Parse a measurement CSV.

    Parameters
    ----------
    stream : file-like, str or bytes
        UTF-8 text with a header row. Lines starting with ``#`` are comments;
        ``# meta: key=value`` comments populate ``Dataset.metadata``.
    schema : mapping, optional
        Column names for ``x``, ``y``, ``value`` and the optional ``valid``.
        Missing valid column means every point is valid.
    source : str, optional
        Stored as ``metadata['source']`` unless the file declares one.

    Raises
    ------
    DatasetError
        Missing column, malformed or non-finite value (with row number),
        duplicate coordinate.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    if isinstance(stream, bytes):
        stream = stream.decode("utf-8")
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    text = stream.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    meta: dict[str, str] = {}
    body = []
    line_numbers = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            content = stripped[1:].strip()
            if content.startswith("meta:") and "=" in content:
                k, _, v = content[5:].strip().partition("=")
                meta[k.strip()] = v.strip()
            continue
        if not stripped:
            continue
        body.append(line)
        line_numbers.append(lineno)
    if not body:
        raise DatasetError("missing header row")

    reader = csv.reader(body)
    header = [h.strip() for h in next(reader)]
    cols = {}
    for role in ("x", "y", "value"):
        name = schema[role]
        if name not in header:
            raise DatasetError(f"missing required column {name!r}")
        cols[role] = header.index(name)
    valid_name = schema.get("valid")
    valid_col = header.index(valid_name) if valid_name and valid_name in header else None

    xs, ys, vs, oks = [], [], [], []
    for row, lineno in zip(reader, line_numbers[1:]):
        if len(row) < len(header):
            raise DatasetError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        xs.append(_parse_int(row[cols["x"]], lineno, schema["x"]))
        ys.append(_parse_int(row[cols["y"]], lineno, schema["y"]))
        ok = True if valid_col is None else _parse_bool(row[valid_col], lineno, valid_name)
        raw = row[cols["value"]].strip()
        try:
            v = float(raw)
        except ValueError:
            if ok:
                raise DatasetError(
                    f"row {lineno}, column {schema['value']!r}: malformed number {raw!r}"
                ) from None
            v = math.nan
        if ok and not math.isfinite(v):
            raise DatasetError(f"row {lineno}, column {schema['value']!r}: non-finite value {raw!r}")
        vs.append(v)
        oks.append(ok)
    if not xs:
        raise DatasetError("no data rows")

    seen = {}
    for i, xy in enumerate(zip(xs, ys)):
        if xy in seen:
            raise DatasetError(
                f"row {line_numbers[i + 1]}: duplicate coordinate {xy} "
                f"(first at row {line_numbers[seen[xy] + 1]})"
            )
        seen[xy] = i

    grid = {}
    for key in _GRID_KEYS:
        if key in meta:
            try:
                grid[key] = int(meta.pop(key))
            except ValueError:
                raise DatasetError(f"metadata {key!r} must be an integer") from None
    if source is not None:
        meta.setdefault("source", source)
    return Dataset(xs, ys, vs, oks, metadata=meta, **grid)


def read_csv(path, schema=None) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh, schema, source=str(path))


def to_csv(d: Dataset, *, include_valid: bool | None = None) -> str:
    """Serialize ``d`` so that ``parse_csv(to_csv(d)) == d``.

    Metadata and grid extents are written as ``# meta:`` comments. Values use
    ``repr`` so they round-trip exactly.
    """
    if include_valid is None:
        include_valid = not bool(d.valid.all())
    out = io.StringIO()
    meta = dict(d.metadata)
    meta.update(
        grid_x0=str(d.grid_x0), grid_y0=str(d.grid_y0),
        grid_width=str(d.grid_width), grid_height=str(d.grid_height),
    )
    for k in sorted(meta):
        v = str(meta[k])
        if "\n" in v or "=" in k:
            raise DatasetError(f"metadata {k!r} cannot be serialized")
        out.write(f"# meta: {k}={v}\n")
    header = ["x", "y", "value"] + (["valid"] if include_valid else [])
    out.write(",".join(header) + "\n")
    for xi, yi, vi, ok in zip(d.x.tolist(), d.y.tolist(), d.value.tolist(), d.valid.tolist()):
        fields = [str(xi), str(yi), repr(vi)]
        if include_valid:
            fields.append("1" if ok else "0")
        out.write(",".join(fields) + "\n")
    return out.getvalue()


def write_csv(d: Dataset, path) -> None:
    from sdesample._io import atomic_write_text

    atomic_write_text(path, to_csv(d))
