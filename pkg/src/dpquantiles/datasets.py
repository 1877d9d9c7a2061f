"""Loading, preprocessing and synthesising datasets, and quantile grids."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import ConfigError, EmptyDatasetError
from .exp_mechanism import SortedDataset
from .slice_quantiles import QuantileQuery


@dataclass(frozen=True)
class RawColumn:
    values: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return int(self.values.shape[0])


def _parse(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, column: int | str = 0, header: bool | None = None) -> RawColumn:
    """Read one numeric column from a UTF-8 CSV file.

    ``column`` is a zero-based index or a header name (which implies a
    header row). With ``header=None`` a first row whose cell does not parse
    as a number is taken to be the header. Errors name the 0-based data row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise EmptyDatasetError(f"{path} is empty")

    if isinstance(column, str):
        header = True
        try:
            col = [c.strip() for c in rows[0]].index(column)
        except ValueError:
            raise ConfigError(f"column {column!r} not in header of {path}") from None
    else:
        col = int(column)
        if header is None:
            first = rows[0][col] if col < len(rows[0]) else ""
            header = _parse(first) is None
    data = rows[1:] if header else rows
    if not data:
        raise EmptyDatasetError(f"{path} has no data rows")

    values = np.empty(len(data))
    for i, row in enumerate(data):
        if col >= len(row):
            raise ValueError(f"{path}: row {i} has no column {col}")
        v = _parse(row[col])
        if v is None or not math.isfinite(v):
            raise ValueError(f"{path}: row {i}: non-numeric value {row[col]!r}")
        values[i] = v
    return RawColumn(values, f"{path}:{column}")


@dataclass(frozen=True)
class PreprocessSpec:
    jitter_sigma: float = 0.01
    duplication: int = 10
    bounds: tuple[float, float] = (0.0, 100.0)
    seed: int = 0

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ConfigError("jitter_sigma must be non-negative")
        if self.duplication < 1:
            raise ConfigError("duplication must be >= 1")
        if not self.bounds[0] < self.bounds[1]:
            raise ConfigError(f"invalid bounds {self.bounds}")


def enforce_min_gap(x, bounds) -> SortedDataset:
    """Sort, clamp into ``[a, b - 1 - 1/n]`` and add ``i/n`` to the i-th value (1-based).

    The result lies strictly inside ``(a, b)`` with consecutive gaps >= 1/n.
    """
    a, b = float(bounds[0]), float(bounds[1])
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    if n == 0:
        raise EmptyDatasetError("dataset is empty")
    top = b - 1 - 1 / n
    if top < a:
        raise ConfigError(f"bounds {bounds} too tight for the 1/n spacing shift")
    x = np.clip(x, a, top) + np.arange(1, n + 1) / n
    return SortedDataset(x, (a, b), 1 / n)


def preprocess(raw: RawColumn, spec: PreprocessSpec) -> SortedDataset:
    """Duplicate, jitter, then enforce the ``1/n`` minimum gap."""
    if len(raw) == 0:
        raise EmptyDatasetError("raw column is empty")
    x = np.repeat(np.asarray(raw.values, dtype=np.float64), spec.duplication)
    if spec.jitter_sigma > 0:
        x = x + np.random.default_rng(spec.seed).normal(0.0, spec.jitter_sigma, size=x.shape[0])
    return enforce_min_gap(x, spec.bounds)


def quantile_grid(count: int, sample_size: int, rng: np.random.Generator) -> QuantileQuery:
    """``sample_size`` distinct points of ``{i / (count + 1)}``, sorted."""
    if not 1 <= sample_size <= count:
        raise ValueError(f"sample_size must lie in [1, {count}], got {sample_size}")
    grid = np.arange(1, count + 1) / (count + 1)
    if sample_size == count:
        return QuantileQuery(grid)
    return QuantileQuery(np.sort(rng.choice(grid, size=sample_size, replace=False)))


Distribution = Literal["uniform", "gaussian", "lognormal"]


def synthesize(dist: Distribution, n: int, bounds=(0.0, 100.0), seed: int = 0) -> SortedDataset:
    """``n`` i.i.d. draws followed by :func:`enforce_min_gap`.

    gaussian: mean at the centre, sd a tenth of the width. lognormal: median
    40 and log-sd 0.3, a skewed age/hours-like shape for the default bounds.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = float(bounds[0]), float(bounds[1])
    rng = np.random.default_rng(seed)
    if dist == "uniform":
        x = rng.uniform(a, b - 1, size=n)
    elif dist == "gaussian":
        x = rng.normal((a + b) / 2, (b - a) / 10, size=n)
    elif dist == "lognormal":
        x = a + rng.lognormal(math.log(0.4 * (b - a)), 0.3, size=n)
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    return enforce_min_gap(x, (a, b))
