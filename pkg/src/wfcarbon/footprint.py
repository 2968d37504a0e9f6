"""Emissions from energy: align each task with carbon-intensity slots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import timedelta

from .ci_store import CISeries, Signal, mean_intensity
from .power import EnergyBreakdown, reserved_memory_energy, task_energy
from .trace_model import TaskRecord, WorkflowTrace


def offset_to_ms(offset: timedelta | float | int) -> int:
    """Signed offset (timedelta or seconds) to integer milliseconds."""
    if isinstance(offset, timedelta):
        return offset // timedelta(milliseconds=1)
    return int(round(offset * 1000))


@dataclass(frozen=True)
class TaskFootprint:
    task_id: str
    energy: EnergyBreakdown
    emissions_g: float


@dataclass(frozen=True)
class FootprintReport:
    label: str
    per_task: tuple[TaskFootprint, ...]
    total_energy_kwh: float
    total_emissions_g: float
    signal: Signal
    zone: str
    offset_s: float = 0.0
    reserved_memory_kwh: float | None = None
    reserved_memory_emissions_g: float | None = None
    filled_ci_slots: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "signal": self.signal.value,
            "zone": self.zone,
            "offset_s": self.offset_s,
            "total_energy_kwh": self.total_energy_kwh,
            "total_emissions_g": self.total_emissions_g,
            "reserved_memory_kwh": self.reserved_memory_kwh,
            "reserved_memory_emissions_g": self.reserved_memory_emissions_g,
            "filled_ci_slots": self.filled_ci_slots,
            "config": self.config,
            "per_task": [
                {
                    "task_id": t.task_id,
                    "cpu_kwh": t.energy.cpu_kwh,
                    "mem_kwh": t.energy.mem_kwh,
                    "total_kwh": t.energy.total_kwh,
                    "emissions_g": t.emissions_g,
                }
                for t in self.per_task
            ],
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        header = ["label", "signal", "zone", "task_id", "cpu_kwh", "mem_kwh", "total_kwh", "emissions_g"]
        rows = [
            [self.label, self.signal.value, self.zone, t.task_id,
             t.energy.cpu_kwh, t.energy.mem_kwh, t.energy.total_kwh, t.emissions_g]
            for t in self.per_task
        ]
        return header, rows


def task_emissions(
    task: TaskRecord,
    energy: EnergyBreakdown,
    series: CISeries,
    offset: timedelta | float = 0,
) -> float:
    """gCO2e for ``energy`` spread uniformly over the task's shifted interval."""
    off = offset_to_ms(offset)
    return energy.total_kwh * mean_intensity(series, task.start_ms + off, task.end_ms + off)


def workflow_footprint(
    trace: WorkflowTrace,
    series: CISeries,
    offset: timedelta | float = 0,
    *,
    pue: float = 1.0,
    include_reserved: bool = False,
) -> FootprintReport:
    """Per-task and total emissions of ``trace`` moved by ``offset``.

    With ``include_reserved`` the full memory of the nodes in use is priced
    over the (shifted) makespan and reported separately from the totals.
    """
    off = offset_to_ms(offset)
    per_task = []
    for task in trace.tasks:
        energy = task_energy(task, trace.node_of(task), pue)
        g = energy.total_kwh * mean_intensity(series, task.start_ms + off, task.end_ms + off)
        per_task.append(TaskFootprint(task.task_id, energy, g))
    reserved_kwh = reserved_g = None
    if include_reserved:
        reserved_kwh = reserved_memory_energy(trace, pue=pue)
        reserved_g = reserved_kwh * mean_intensity(series, trace.start_ms + off, trace.end_ms + off)
    offset_s = off / 1000
    label = f"{trace.label}@{offset_s:+g}s" if trace.label else f"offset {offset_s:+g}s"
    return FootprintReport(
        label=label,
        per_task=tuple(per_task),
        total_energy_kwh=math.fsum(t.energy.total_kwh for t in per_task),
        total_emissions_g=math.fsum(t.emissions_g for t in per_task),
        signal=series.signal,
        zone=series.zone,
        offset_s=offset_s,
        reserved_memory_kwh=reserved_kwh,
        reserved_memory_emissions_g=reserved_g,
        filled_ci_slots=len(series.filled),
        config={"pue": pue},
    )
