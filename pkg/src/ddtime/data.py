"""Loading, standardizing, splitting, and windowing multivariate time series.

Series are stored as ``[d, L]`` float64 arrays (one row per variable, one
column per timestep). All functions here are pure: they never mutate their
inputs and are safe to call concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyFileError,
    EmptySplitError,
    NonFiniteValueError,
    NonNumericCellError,
    NoWindowsError,
    RaggedRowsError,
    ShapeMismatchError,
)

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class DelimitedFormat:
    """Describes a delimited text file: one timestep per row, one variable per column.

    ``delimiter=None`` auto-detects tab vs comma from the first line;
    ``header`` is one of ``"auto"``, ``"yes"``, ``"no"``.
    """

    delimiter: str | None = None
    header: str = "auto"


@dataclass(frozen=True, eq=False)
class RawSeries:
    """A multivariate series: ``values`` is ``[d, L]``, variables × timesteps."""

    values: np.ndarray
    variable_names: tuple[str, ...]
    source_path: str = ""

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """Per-variable mean and population std, kept for inverting the transform."""

    mean: np.ndarray
    std: np.ndarray
    epsilon: float

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / (self.std[:, None] + self.epsilon)

    def invert(self, values: np.ndarray) -> np.ndarray:
        return self.mean[:, None] + (self.std[:, None] + self.epsilon) * values


@dataclass(frozen=True, eq=False)
class WindowPair:
    """One supervised forecasting example cut from a series at ``start_index``."""

    input: np.ndarray   # [d, t_in]
    target: np.ndarray  # [d, t_out]
    start_index: int


@dataclass(eq=False)
class WindowedDataset:
    """Ordered sliding windows over one series."""

    pairs: list[WindowPair]
    t_in: int
    t_out: int
    stride: int
    n_vars: int

    def __len__(self) -> int:
        return len(self.pairs)

    def inputs(self) -> np.ndarray:
        """Stack all window inputs into ``[B, d, t_in]``."""
        return np.stack([p.input for p in self.pairs])

    def targets(self) -> np.ndarray:
        """Stack all window targets into ``[B, d, t_out]``."""
        return np.stack([p.target for p in self.pairs])


def _parse_cell(cell: str, row_idx: int, col_idx: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise NonNumericCellError(
            f"row {row_idx}, column {col_idx}: {cell!r} is not numeric"
        ) from None


def _row_is_numeric(row: list[str]) -> bool:
    for cell in row:
        try:
            float(cell)
        except ValueError:
            return False
    return True


def load_series(path: str, fmt: DelimitedFormat | None = None) -> RawSeries:
    """Read a delimited text file into a ``RawSeries``.

    Raises ``FileNotFoundError``, ``EmptyFileError``, ``RaggedRowsError``,
    ``NonNumericCellError``, or ``NonFiniteValueError`` depending on what is
    wrong with the file.
    """
    fmt = fmt or DelimitedFormat()
    with open(path, "r", newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyFileError(f"{path}: no data rows")

    delimiter = fmt.delimiter
    if delimiter is None:
        delimiter = "\t" if "\t" in lines[0] else ","
    rows = [[c.strip() for c in r] for r in csv.reader(lines, delimiter=delimiter)]

    n_cols = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != n_cols:
            raise RaggedRowsError(
                f"{path}: row {i} has {len(row)} columns, expected {n_cols}"
            )

    if fmt.header == "yes":
        has_header = True
    elif fmt.header == "no":
        has_header = False
    else:
        has_header = not _row_is_numeric(rows[0])
    if has_header:
        names = tuple(rows[0])
        data_rows = rows[1:]
    else:
        names = tuple(f"v{j}" for j in range(n_cols))
        data_rows = rows

    if not data_rows:
        raise EmptyFileError(f"{path}: header only, no data rows")

    values = np.empty((len(data_rows), n_cols), dtype=np.float64)
    offset = 1 if has_header else 0
    for i, row in enumerate(data_rows):
        for j, cell in enumerate(row):
            values[i, j] = _parse_cell(cell, i + offset, j)
    if not np.isfinite(values).all():
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValueError(
            f"{path}: non-finite value at row {bad[0] + offset}, column {bad[1]}"
        )

    return RawSeries(values=values.T.copy(), variable_names=names, source_path=str(path))


def standardize(
    series: RawSeries, epsilon: float = DEFAULT_EPSILON
) -> tuple[RawSeries, StandardizationStats]:
    """Shift/scale each variable to mean 0 and (population) std 1.

    Constant variables are handled by the ``epsilon`` guard in the divisor.
    """
    mean = series.values.mean(axis=1)
    std = series.values.std(axis=1)  # population std, divide by L
    stats = StandardizationStats(mean=mean, std=std, epsilon=float(epsilon))
    out = RawSeries(
        values=stats.apply(series.values),
        variable_names=series.variable_names,
        source_path=series.source_path,
    )
    return out, stats


def apply_standardization(series: RawSeries, stats: StandardizationStats) -> RawSeries:
    """Standardize with previously fitted stats (e.g. train stats on val/test)."""
    return RawSeries(
        values=stats.apply(series.values),
        variable_names=series.variable_names,
        source_path=series.source_path,
    )


def split(
    series: RawSeries, ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
) -> tuple[RawSeries, RawSeries, RawSeries]:
    """Chronological train/val/test split: floor train, floor val, remainder test."""
    if any(r <= 0 for r in ratios):
        raise EmptySplitError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise EmptySplitError(f"ratios must sum to 1, got {ratios}")
    length = series.length
    n_train = math.floor(ratios[0] * length)
    n_val = math.floor(ratios[1] * length)
    n_test = length - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise EmptySplitError(
            f"split of L={length} gives lengths ({n_train}, {n_val}, {n_test})"
        )

    def piece(lo: int, hi: int) -> RawSeries:
        return RawSeries(
            values=series.values[:, lo:hi].copy(),
            variable_names=series.variable_names,
            source_path=series.source_path,
        )

    return (
        piece(0, n_train),
        piece(n_train, n_train + n_val),
        piece(n_train + n_val, length),
    )


def slide_windows(
    series: RawSeries, t_in: int = 24, t_out: int = 24, stride: int = 12
) -> WindowedDataset:
    """Cut ``(input, target)`` window pairs starting at 0, stride, 2·stride, ..."""
    if min(t_in, t_out, stride) < 1:
        raise ValueError("t_in, t_out, stride must all be >= 1")
    span = t_in + t_out
    pairs = []
    for start in range(0, series.length - span + 1, stride):
        pairs.append(
            WindowPair(
                input=series.values[:, start : start + t_in].copy(),
                target=series.values[:, start + t_in : start + span].copy(),
                start_index=start,
            )
        )
    if not pairs:
        raise NoWindowsError(
            f"series of length {series.length} cannot fit one {span}-step window"
        )
    return WindowedDataset(
        pairs=pairs, t_in=t_in, t_out=t_out, stride=stride, n_vars=series.n_vars
    )


def sample_windows(dataset: WindowedDataset, count: int, seed: int) -> list[WindowPair]:
    """Draw ``count`` windows uniformly with replacement, deterministically."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not dataset.pairs:
        raise NoWindowsError("cannot sample from an empty dataset")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(dataset.pairs), size=count)
    return [dataset.pairs[i] for i in idx]


def make_sinusoid_series(
    length: int = 600,
    n_vars: int = 2,
    seed: int = 0,
    noise: float = 0.1,
) -> RawSeries:
    """Generate a small noisy-sinusoid benchmark series.

    Each variable mixes two incommensurate periods with a random phase, plus
    iid Gaussian noise; used by the desk-scale experiments and the README
    walkthrough.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    values = np.empty((n_vars, length))
    for c in range(n_vars):
        p1 = 24.0 * (1.0 + 0.25 * c)
        p2 = 9.0 + 2.0 * c
        phase1, phase2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
        values[c] = (
            np.sin(2.0 * np.pi * t / p1 + phase1)
            + 0.4 * np.sin(2.0 * np.pi * t / p2 + phase2)
            + noise * rng.standard_normal(length)
        )
    names = tuple(f"sin{c}" for c in range(n_vars))
    return RawSeries(values=values, variable_names=names, source_path="<sinusoid>")


def save_series_csv(series: RawSeries, path: str) -> None:
    """Write a series back to comma-delimited text (header + one row per step)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(series.variable_names)
        for row in series.values.T:
            writer.writerow([repr(v) for v in row])
