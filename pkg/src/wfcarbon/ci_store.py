"""Carbon-intensity time series: loading, point/interval queries, year rebasing.

A series is a right-open step function: slot ``i`` covers
``[start + i*interval, start + (i+1)*interval)`` at a constant intensity in
gCO2e/kWh. No interpolation happens inside a slot.
"""

from __future__ import annotations

import calendar
import csv
import io
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path

from .errors import EmptyCISeries, MissingColumn, NegativeIntensity, NonUniformInterval, OutOfRange
from .timeutil import format_instant, from_ms, parse_instant, to_ms

LBS_PER_MWH_TO_G_PER_KWH = 453.592 / 1000

CANONICAL_HEADER = ("timestamp_utc", "ci_gco2e_per_kwh")


class Signal(str, Enum):
    AVERAGE = "average"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class CISeries:
    zone: str
    signal: Signal
    interval_s: int
    start_ms: int
    values: tuple[float, ...]
    # indices of slots synthesized by gap filling
    filled: tuple[int, ...] = ()
    interval_ms: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "signal", Signal(self.signal))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "interval_ms", int(self.interval_s * 1000))
        if not self.values:
            raise EmptyCISeries()
        if self.interval_ms <= 0:
            raise ValueError("interval must be positive")
        for i, v in enumerate(self.values):
            if v < 0:
                raise NegativeIntensity(from_ms(self.slot_start_ms(i)), v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_ms(self) -> int:
        return self.start_ms + len(self.values) * self.interval_ms

    @property
    def start(self) -> datetime:
        return from_ms(self.start_ms)

    @property
    def end(self) -> datetime:
        return from_ms(self.end_ms)

    @property
    def points(self) -> list[tuple[datetime, float]]:
        return [(from_ms(self.slot_start_ms(i)), v) for i, v in enumerate(self.values)]

    def slot_start_ms(self, index: int) -> int:
        return self.start_ms + index * self.interval_ms

    def slot_index(self, t_ms: int) -> int:
        """Index of the slot containing ``t_ms``; raises :class:`OutOfRange`."""
        if not (self.start_ms <= t_ms < self.end_ms):
            raise OutOfRange(from_ms(t_ms), (self.start, self.end))
        return (t_ms - self.start_ms) // self.interval_ms

    def covers(self, start_ms: int, end_ms: int) -> bool:
        return self.start_ms <= start_ms and end_ms <= self.end_ms

    def resample(self, interval_s: int) -> CISeries:
        """Re-express the series on a different slot length.

        Finer slots repeat the parent value; coarser slots average the
        children, and a trailing incomplete coarse slot is dropped.
        """
        new_ms = int(interval_s * 1000)
        if new_ms == self.interval_ms:
            return self
        if self.interval_ms % new_ms == 0:
            k = self.interval_ms // new_ms
            values = [v for v in self.values for _ in range(k)]
            filled = tuple(i * k + j for i in self.filled for j in range(k))
        elif new_ms % self.interval_ms == 0:
            k = new_ms // self.interval_ms
            n = len(self.values) // k
            if n == 0:
                raise EmptyCISeries("series shorter than one resampled slot")
            values = [sum(self.values[i * k:(i + 1) * k]) / k for i in range(n)]
            filled = tuple(sorted({i // k for i in self.filled if i // k < n}))
        else:
            raise ValueError(f"cannot resample {self.interval_s}s slots to {interval_s}s")
        return CISeries(self.zone, self.signal, interval_s, self.start_ms, tuple(values), filled)


def _detect_columns(header: list[str]) -> tuple[str, str, float]:
    """Return (timestamp column, intensity column, unit factor) for a header."""
    lowered = {h.strip().lower(): h for h in header}
    if all(c in lowered for c in CANONICAL_HEADER):
        return lowered["timestamp_utc"], lowered["ci_gco2e_per_kwh"], 1.0

    # Electricity Maps export
    dt_col = next((h for h in header if h.strip().lower() == "datetime (utc)"), None)
    ci_cols = [h for h in header if "carbon intensity" in h.lower()]
    if dt_col and ci_cols:
        direct = [h for h in ci_cols if "direct" in h.lower()]
        return dt_col, (direct or ci_cols)[0], 1.0

    # WattTime MOER export, lbs CO2/MWh
    ts_col = next((lowered[c] for c in ("point_time", "timestamp") if c in lowered), None)
    val_col = next((lowered[c] for c in ("value", "moer") if c in lowered), None)
    if ts_col and val_col:
        return ts_col, val_col, LBS_PER_MWH_TO_G_PER_KWH

    if "timestamp_utc" not in lowered and dt_col is None and ts_col is None:
        raise MissingColumn("timestamp_utc")
    raise MissingColumn("ci_gco2e_per_kwh")


def parse_ci(
    content: str,
    signal: Signal | str,
    zone: str,
    *,
    fill_gaps: bool = False,
    interval_s: int | None = None,
) -> CISeries:
    """Parse comma-separated CI text (canonical, Electricity Maps or WattTime).

    The slot length is inferred from the first two rows (or given via
    ``interval_s``) and checked on every later row. Missing slots raise
    :class:`NonUniformInterval` unless ``fill_gaps`` carries the previous
    value forward.
    """
    reader = csv.reader(io.StringIO(content.lstrip("﻿")))
    rows = [r for r in reader if any(c.strip() for c in r)]
    if not rows:
        raise EmptyCISeries()
    header = [h.strip() for h in rows[0]]
    ts_col, val_col, factor = _detect_columns(header)
    ts_i, val_i = header.index(ts_col.strip()), header.index(val_col.strip())

    points: list[tuple[int, float]] = []
    for row in rows[1:]:
        if max(ts_i, val_i) >= len(row):
            continue
        raw_t, raw_v = row[ts_i].strip(), row[val_i].strip()
        if not raw_t:
            continue
        t_ms = to_ms(parse_instant(raw_t))
        if raw_v in ("", "-"):
            # treated as a missing slot; gap handling below decides
            continue
        value = float(raw_v) * factor
        if value < 0:
            raise NegativeIntensity(from_ms(t_ms), value)
        points.append((t_ms, value))
    if not points:
        raise EmptyCISeries()

    if interval_s is not None:
        step_ms = int(interval_s * 1000)
    elif len(points) >= 2:
        step_ms = points[1][0] - points[0][0]
    else:
        step_ms = 3_600_000
    if step_ms <= 0:
        raise NonUniformInterval(from_ms(points[1][0]), 0, step_ms / 1000)

    values = [points[0][1]]
    filled: list[int] = []
    prev = points[0][0]
    for t_ms, value in points[1:]:
        gap = t_ms - prev
        if gap != step_ms:
            if not (fill_gaps and gap > 0 and gap % step_ms == 0):
                raise NonUniformInterval(from_ms(t_ms), step_ms / 1000, gap / 1000)
            for _ in range(gap // step_ms - 1):
                filled.append(len(values))
                values.append(values[-1])
        values.append(value)
        prev = t_ms
    return CISeries(zone, Signal(signal), step_ms / 1000 if step_ms % 1000 else step_ms // 1000,
                    points[0][0], tuple(values), tuple(filled))


def load_ci(path: str | Path, signal: Signal | str, zone: str, **kwargs) -> CISeries:
    return parse_ci(Path(path).read_text(encoding="utf-8"), signal, zone, **kwargs)


def format_ci(series: CISeries) -> str:
    """Serialize to the canonical ``timestamp_utc,ci_gco2e_per_kwh`` CSV."""
    lines = [",".join(CANONICAL_HEADER)]
    lines += [f"{format_instant(t)},{v!r}" for t, v in series.points]
    return "\n".join(lines) + "\n"


def ci_at(series: CISeries, t: datetime) -> float:
    """Intensity of the slot containing ``t``."""
    return series.values[series.slot_index(to_ms(t))]


def overlap_ms(series: CISeries, start_ms: int, end_ms: int) -> list[tuple[int, int]]:
    """(slot index, overlapped milliseconds) pairs for ``[start_ms, end_ms)``."""
    if not series.covers(start_ms, end_ms):
        bad = start_ms if start_ms < series.start_ms else end_ms
        raise OutOfRange(from_ms(bad), (series.start, series.end))
    step = series.interval_ms
    first = (start_ms - series.start_ms) // step
    last = (end_ms - 1 - series.start_ms) // step
    out = []
    for i in range(first, last + 1):
        lo = series.start_ms + i * step
        ov = min(end_ms, lo + step) - max(start_ms, lo)
        if ov > 0:
            out.append((i, ov))
    return out


def overlap_weights(series: CISeries, start: datetime, end: datetime) -> list[tuple[datetime, float]]:
    """Split ``[start, end)`` across slots as (slot start, fraction of duration)."""
    a, b = to_ms(start), to_ms(end)
    if b <= a:
        raise ValueError("overlap_weights requires start < end")
    dur = b - a
    return [(from_ms(series.slot_start_ms(i)), ov / dur) for i, ov in overlap_ms(series, a, b)]


def mean_intensity(series: CISeries, start_ms: int, end_ms: int) -> float:
    """Duration-weighted mean intensity over ``[start_ms, end_ms)``.

    A zero-length interval returns the intensity of the slot containing it.
    The sum is anchored on the first slot so a flat stretch returns its value
    exactly.
    """
    if end_ms <= start_ms:
        if start_ms == series.end_ms and start_ms > series.start_ms:
            return series.values[-1]
        return series.values[series.slot_index(start_ms)]
    parts = overlap_ms(series, start_ms, end_ms)
    vals = series.values
    base = vals[parts[0][0]]
    if len(parts) == 1:
        return base
    dur = end_ms - start_ms
    return base + sum(ov * (vals[i] - base) for i, ov in parts) / dur


def rebase_year(t: datetime, target_year: int) -> datetime:
    """Move ``t`` to ``target_year`` keeping month, day and time of day.

    Feb 29 becomes Feb 28 when the target year is not a leap year.
    """
    if t.year == target_year:
        return t
    day = t.day
    if t.month == 2 and day == 29 and not calendar.isleap(target_year):
        day = 28
    return t.replace(year=target_year, day=day)
