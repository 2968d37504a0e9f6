"""Carbon-aware temporal shifting of whole workflows and of hourly windows.

Two strategies are simulated against a recorded execution:

* whole: the entire schedule is moved by a fixed offset, searched on a grid
  inside a symmetric flexibility window;
* interrupted: the schedule is cut into slot-length execution windows that
  are mapped, in their original order, onto the lowest-intensity slots of
  the flexibility range. Each interruption costs at most the longest task
  that started in the window before it but had not yet finished.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .ci_store import CISeries, mean_intensity
from .errors import InsufficientSlots, NoFeasibleOffset, OutOfRange
from .power import task_energy
from .timeutil import ceil_to, floor_to, from_ms, to_ms
from .trace_model import WorkflowTrace, makespan

MS_PER_H = 3_600_000

# Candidates whose footprints differ by less than this relative amount are
# treated as tied, so summation noise cannot override the tie-break.
TIE_RTOL = 1e-12


class Strategy(str, Enum):
    WHOLE = "whole"
    INTERRUPTED = "interrupted"


def per_side_hours(flexibility_h: float, convention: str = "per-side") -> float:
    """Hours of movement allowed in each direction.

    ``per-side`` takes ``flexibility_h`` as ±hours; ``total`` takes it as the
    full window width, so 48 means ±24.
    """
    if convention == "per-side":
        return flexibility_h
    if convention == "total":
        return flexibility_h / 2
    raise ValueError(f"unknown flexibility convention {convention!r}")


@dataclass(frozen=True)
class OffsetCandidate:
    offset_s: float
    footprint_g: float
    mean_intensity: float


@dataclass(frozen=True)
class WindowAssignment:
    window_index: int
    original_slot: datetime
    original_intensity: float
    assigned_slot: datetime
    assigned_intensity: float
    energy_kwh: float
    emissions_g: float


@dataclass(frozen=True)
class ExecutionWindow:
    index: int
    window_start: datetime
    window_end: datetime
    complete_tasks: frozenset[str]
    partial_tasks: frozenset[str]
    energy_kwh: float
    longest_partial_s: float

    @property
    def length_ms(self) -> int:
        return to_ms(self.window_end) - to_ms(self.window_start)


@dataclass(frozen=True)
class ShiftResult:
    strategy: Strategy
    flexibility_h: float
    baseline_g: float
    best_g: float
    reduction_pct: float
    makespan_s: float
    chosen_offset_s: float | None = None
    slot_assignment: tuple[tuple[int, datetime], ...] = ()
    overhead_s: float = 0.0
    overhead_pct: float = 0.0
    skipped_offsets: int = 0
    candidates: tuple[OffsetCandidate, ...] = ()
    windows: tuple[WindowAssignment, ...] = ()
    zone: str = ""
    signal: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "strategy": self.strategy.value,
            "flexibility_h": self.flexibility_h,
            "baseline_g": self.baseline_g,
            "best_g": self.best_g,
            "reduction_pct": self.reduction_pct,
            "makespan_s": self.makespan_s,
            "overhead_s": self.overhead_s,
            "overhead_pct": self.overhead_pct,
            "zone": self.zone,
            "signal": self.signal,
            "config": self.config,
        }
        if self.strategy is Strategy.WHOLE:
            d["chosen_offset_s"] = self.chosen_offset_s
            d["skipped_offsets"] = self.skipped_offsets
        else:
            d["slot_assignment"] = [
                {"window_index": i, "slot_start": slot} for i, slot in self.slot_assignment
            ]
        return d

    def csv_rows(self) -> tuple[list[str], list[list]]:
        header = ["strategy", "flexibility_h", "baseline_g", "best_g", "reduction_pct",
                  "chosen_offset_s", "overhead_s", "overhead_pct", "zone", "signal"]
        row = [self.strategy.value, self.flexibility_h, self.baseline_g, self.best_g,
               self.reduction_pct, self.chosen_offset_s, self.overhead_s, self.overhead_pct,
               self.zone, self.signal]
        return header, [row]

    def plot_rows(self) -> tuple[list[str], list[list]]:
        """Per-candidate rows for external plotting."""
        if self.strategy is Strategy.WHOLE:
            header = ["offset_s", "mean_intensity", "footprint_g", "chosen"]
            rows = [[c.offset_s, c.mean_intensity, c.footprint_g, c.offset_s == self.chosen_offset_s]
                    for c in self.candidates]
            return header, rows
        header = ["window_index", "original_slot", "original_intensity", "assigned_slot",
                  "assigned_intensity", "energy_kwh", "emissions_g"]
        rows = [[w.window_index, w.original_slot, w.original_intensity, w.assigned_slot,
                 w.assigned_intensity, w.energy_kwh, w.emissions_g] for w in self.windows]
        return header, rows


def reduction_pct(baseline_g: float, best_g: float) -> float:
    if baseline_g == 0:
        return 0.0
    return 100.0 * (baseline_g - best_g) / baseline_g


def _task_loads(trace: WorkflowTrace, pue: float) -> list[tuple[int, int, float]]:
    return [(t.start_ms, t.end_ms, task_energy(t, trace.node_of(t), pue).total_kwh) for t in trace.tasks]


def _footprint_at(loads, series: CISeries, off: int) -> float:
    return math.fsum(kwh * mean_intensity(series, a + off, b + off) for a, b, kwh in loads)


def _pick_best(candidates: list[tuple[int, float]]) -> tuple[int, float]:
    """Lowest footprint; near-ties go to the smallest |offset|, then the earlier."""
    best = min(g for _, g in candidates)
    tol = TIE_RTOL * abs(best)
    tied = [(off, g) for off, g in candidates if g <= best + tol]
    return min(tied, key=lambda c: (abs(c[0]), c[0]))


def shift_whole(
    trace: WorkflowTrace,
    series: CISeries,
    flexibility_h: float,
    step_s: float = 3600,
    *,
    pue: float = 1.0,
) -> ShiftResult:
    """Search start offsets in ``[-flexibility_h, +flexibility_h]`` hours.

    Offsets that would move any task outside the series are skipped; if all
    are skipped :class:`NoFeasibleOffset` is raised.
    """
    if flexibility_h < 0:
        raise ValueError("flexibility_h must be >= 0")
    step_ms = int(round(step_s * 1000))
    if step_ms <= 0:
        raise ValueError("step_s must be positive")
    loads = _task_loads(trace, pue)
    lo, hi = trace.start_ms, trace.end_ms
    baseline = _footprint_at(loads, series, 0)

    limit = int(round(flexibility_h * MS_PER_H))
    evaluated: list[tuple[int, float]] = []
    skipped = 0
    for off in range(-limit, limit + 1, step_ms):
        if not series.covers(lo + off, hi + off):
            skipped += 1
            continue
        evaluated.append((off, baseline if off == 0 else _footprint_at(loads, series, off)))
    if not evaluated:
        raise NoFeasibleOffset(skipped)

    best_off, best_g = _pick_best(evaluated)
    total_kwh = math.fsum(kwh for _, _, kwh in loads)
    candidates = tuple(
        OffsetCandidate(off / 1000, g, g / total_kwh if total_kwh else 0.0) for off, g in evaluated
    )
    return ShiftResult(
        strategy=Strategy.WHOLE,
        flexibility_h=flexibility_h,
        baseline_g=baseline,
        best_g=best_g,
        reduction_pct=reduction_pct(baseline, best_g),
        makespan_s=makespan(trace),
        chosen_offset_s=best_off / 1000,
        skipped_offsets=skipped,
        candidates=candidates,
        zone=series.zone,
        signal=series.signal.value,
        config={"step_s": step_ms / 1000, "pue": pue},
    )


def build_windows(
    trace: WorkflowTrace,
    window_s: float = 3600,
    *,
    origin: datetime | None = None,
    pue: float = 1.0,
) -> list[ExecutionWindow]:
    """Cut the schedule into consecutive fixed-length windows.

    Windows run from the first task start rounded down to the window grid
    (anchored at ``origin``, default the Unix epoch, i.e. whole UTC hours) to
    the last task end rounded up. A task is *complete* in the window where it
    starts if it also ends there (end on the boundary counts), otherwise it
    is *partial* there. Task energy is split across windows in proportion to
    overlap.
    """
    step = int(round(window_s * 1000))
    org = to_ms(origin) if origin is not None else 0
    first = floor_to(trace.start_ms, step, org)
    last = ceil_to(trace.end_ms, step, org)
    n = max(1, (last - first) // step)

    parts: dict[int, list[float]] = defaultdict(list)
    complete: dict[int, set[str]] = defaultdict(set)
    partial: dict[int, set[str]] = defaultdict(set)
    longest: dict[int, float] = defaultdict(float)
    for t in trace.tasks:
        kwh = task_energy(t, trace.node_of(t), pue).total_kwh
        w0 = (t.start_ms - first) // step
        if t.end_ms <= first + (w0 + 1) * step:
            complete[w0].add(t.task_id)
        else:
            partial[w0].add(t.task_id)
            longest[w0] = max(longest[w0], t.duration_s)
        dur = t.end_ms - t.start_ms
        if dur == 0:
            parts[w0].append(kwh)
            continue
        w_last = (t.end_ms - 1 - first) // step
        for w in range(w0, w_last + 1):
            ws = first + w * step
            ov = min(t.end_ms, ws + step) - max(t.start_ms, ws)
            if ov > 0:
                parts[w].append(kwh * ov / dur)

    return [
        ExecutionWindow(
            index=w,
            window_start=from_ms(first + w * step),
            window_end=from_ms(first + (w + 1) * step),
            complete_tasks=frozenset(complete[w]),
            partial_tasks=frozenset(partial[w]),
            energy_kwh=math.fsum(parts[w]),
            longest_partial_s=longest[w],
        )
        for w in range(n)
    ]


def _slot_range(windows: list[ExecutionWindow], series: CISeries, flexibility_h: float) -> range:
    flex = int(round(flexibility_h * MS_PER_H))
    lo = to_ms(windows[0].window_start) - flex
    hi = to_ms(windows[-1].window_end) + flex
    step = series.interval_ms
    first = max(0, -((series.start_ms - lo) // step))
    last = min(len(series), (hi - series.start_ms) // step)
    return range(first, max(first, last))


def select_slots(
    windows: list[ExecutionWindow],
    series: CISeries,
    flexibility_h: float,
) -> list[tuple[int, datetime]]:
    """Map windows, in order, to the lowest-intensity slots of the range.

    The range spans ``flexibility_h`` hours before the first window to
    ``flexibility_h`` hours after the last one, clipped to the series. The
    ``k = len(windows)`` cheapest slots are taken (earlier slot wins a tie),
    sorted chronologically, and window ``i`` gets the ``i``-th of them.
    """
    k = len(windows)
    candidates = _slot_range(windows, series, flexibility_h)
    if k > len(candidates):
        raise InsufficientSlots(k, len(candidates))
    vals = series.values
    chosen = sorted(sorted(candidates, key=lambda i: (vals[i], i))[:k])
    return [(w.index, from_ms(series.slot_start_ms(i))) for w, i in zip(windows, chosen)]


def interruption_overhead(
    windows: list[ExecutionWindow],
    assignment: list[tuple[int, datetime]],
) -> float:
    """Upper-bound runtime overhead, in seconds, of an interrupted schedule.

    Every window whose slot is not immediately followed by the next window's
    slot contributes the full duration of its longest partial task.
    """
    slots = [to_ms(s) for _, s in assignment]
    total = 0.0
    for i in range(len(slots) - 1):
        if slots[i + 1] != slots[i] + windows[i].length_ms:
            total += windows[i].longest_partial_s
    return total


def shift_interrupted(
    trace: WorkflowTrace,
    series: CISeries,
    flexibility_h: float,
    *,
    window_s: float | None = None,
    pue: float = 1.0,
) -> ShiftResult:
    """Simulate interrupted execution over the lowest-intensity slots.

    Window energy is re-priced at its assigned slot; no re-execution energy
    is added. The baseline prices each window at its original slot.
    """
    if flexibility_h < 0:
        raise ValueError("flexibility_h must be >= 0")
    if window_s is not None:
        series = series.resample(window_s)
    windows = build_windows(trace, series.interval_s, origin=series.start, pue=pue)
    orig = []
    for w in windows:
        ws = to_ms(w.window_start)
        if not series.covers(ws, ws + w.length_ms):
            raise OutOfRange(w.window_start if ws < series.start_ms else w.window_end,
                             (series.start, series.end))
        orig.append(series.slot_index(ws))

    assignment = select_slots(windows, series, flexibility_h)
    vals = series.values
    rows = []
    for w, o, (_, slot) in zip(windows, orig, assignment):
        a = series.slot_index(to_ms(slot))
        rows.append(WindowAssignment(
            window_index=w.index,
            original_slot=w.window_start,
            original_intensity=vals[o],
            assigned_slot=slot,
            assigned_intensity=vals[a],
            energy_kwh=w.energy_kwh,
            emissions_g=w.energy_kwh * vals[a],
        ))
    baseline = math.fsum(w.energy_kwh * vals[o] for w, o in zip(windows, orig))
    best = math.fsum(r.emissions_g for r in rows)
    overhead = interruption_overhead(windows, assignment)
    span = makespan(trace)
    return ShiftResult(
        strategy=Strategy.INTERRUPTED,
        flexibility_h=flexibility_h,
        baseline_g=baseline,
        best_g=best,
        reduction_pct=reduction_pct(baseline, best),
        makespan_s=span,
        slot_assignment=tuple(assignment),
        overhead_s=overhead,
        overhead_pct=100.0 * overhead / span if span else 0.0,
        windows=tuple(rows),
        zone=series.zone,
        signal=series.signal.value,
        config={"window_s": series.interval_s, "pue": pue},
    )
