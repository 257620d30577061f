"""Time-series storage and trace CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

REQUIRED_COLUMNS = ("timestamp", "load_mw", "wind_cf", "solar_cf")
LOAD_SHAPE_ID = "load"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("trace must be one-dimensional")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TraceStore:
    """Named per-step series plus the step-to-day calendar.

    Series are stored read-only.  ``steps_per_day`` fixes the calendar used by
    the day-block bootstrap: step ``t`` belongs to day ``t // steps_per_day``.
    """

    series: Mapping[str, np.ndarray] = field(default_factory=dict)
    steps_per_day: int = 24

    def __post_init__(self):
        if self.steps_per_day < 1:
            raise ValueError("steps_per_day must be >= 1")
        frozen = {str(k): _frozen(v) for k, v in self.series.items()}
        for k, v in frozen.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"trace {k!r} contains non-finite values")
        object.__setattr__(self, "series", MappingProxyType(frozen))

    def __getitem__(self, trace_id: str) -> np.ndarray:
        try:
            return self.series[trace_id]
        except KeyError:
            raise KeyError(f"unknown trace {trace_id!r}") from None

    def __contains__(self, trace_id: str) -> bool:
        return trace_id in self.series

    def __len__(self) -> int:
        return len(self.series)

    @property
    def length(self) -> int:
        """Number of steps covered by every series."""
        return min((len(v) for v in self.series.values()), default=0)

    @property
    def n_days(self) -> int:
        return self.length // self.steps_per_day

    def day_of_step(self, t):
        return np.asarray(t) // self.steps_per_day

    def with_series(self, **new: Iterable[float]) -> "TraceStore":
        merged = dict(self.series)
        merged.update(new)
        return TraceStore(merged, self.steps_per_day)

    def digest_items(self):
        """(id, bytes) pairs in sorted order, for hashing."""
        return [(k, self.series[k].tobytes()) for k in sorted(self.series)]


def read_trace_csv(path, steps_per_day: int = 24) -> TraceStore:
    """Load a trace CSV.

    The header must begin with ``timestamp,load_mw,wind_cf,solar_cf``; any
    extra columns become traces named after the column.  ``load_mw`` is kept
    raw and also normalised to a peak of 1.0 under the id ``"load"``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty trace file") from None
        if tuple(header[: len(REQUIRED_COLUMNS)]) != REQUIRED_COLUMNS:
            raise ValueError(f"{path}: header must start with {','.join(REQUIRED_COLUMNS)}")
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names")
        columns: list[list[float]] = [[] for _ in header[1:]]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for col, raw in zip(columns, row[1:]):
                try:
                    col.append(float(raw))
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: not a number: {raw!r}") from None
    data = {name: np.array(col) for name, col in zip(header[1:], columns)}
    load = data["load_mw"]
    if len(load) == 0:
        raise ValueError(f"{path}: no data rows")
    peak = load.max()
    if peak <= 0:
        raise ValueError(f"{path}: load_mw must have a positive maximum")
    data[LOAD_SHAPE_ID] = load / peak
    return TraceStore(data, steps_per_day)


def write_trace_csv(path, load_mw, wind_cf, solar_cf, extra: Mapping[str, np.ndarray] | None = None,
                    start_hour: int = 0) -> None:
    """Write a trace CSV with integer-hour timestamps."""
    extra = dict(extra or {})
    cols = [np.asarray(load_mw), np.asarray(wind_cf), np.asarray(solar_cf), *map(np.asarray, extra.values())]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("all columns must have equal length")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*REQUIRED_COLUMNS, *extra.keys()])
        for t in range(n):
            w.writerow([start_hour + t, *(repr(float(c[t])) for c in cols)])
