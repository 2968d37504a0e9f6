"""What-if comparisons: device choice, processor frequency, cluster size."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path

from .ci_store import CISeries, mean_intensity
from .errors import ConfigError, OutOfRange, WorkflowCarbonError
from .footprint import workflow_footprint
from .power import workflow_energy
from .timeutil import to_ms
from .trace_model import WorkflowTrace, makespan

PROFILE_COLUMNS = ("label", "runtime_s", "energy_kwh", "source")


class Source(str, Enum):
    MEASURED = "measured"
    MODELED = "modeled"


@dataclass(frozen=True)
class TaskProfile:
    label: str
    runtime_s: float
    energy_kwh: float
    source: Source = Source.MEASURED

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        if self.runtime_s <= 0:
            raise ValueError(f"profile {self.label}: runtime_s must be > 0")
        if self.energy_kwh < 0:
            raise ValueError(f"profile {self.label}: energy_kwh must be >= 0")


@dataclass(frozen=True)
class RankedProfile:
    profile: TaskProfile
    emissions_g: float | None
    error: str | None = None
    frequency_ghz: float | None = None

    @property
    def feasible(self) -> bool:
        return self.emissions_g is not None

    def to_dict(self) -> dict:
        d = {
            "label": self.profile.label,
            "runtime_s": self.profile.runtime_s,
            "energy_kwh": self.profile.energy_kwh,
            "source": self.profile.source.value,
            "emissions_g": self.emissions_g,
            "feasible": self.feasible,
            "error": self.error,
        }
        if self.frequency_ghz is not None:
            d["frequency_ghz"] = self.frequency_ghz
        return d


def parse_profiles(content: str) -> list[TaskProfile]:
    """Read ``label,runtime_s,energy_kwh,source`` CSV text."""
    reader = csv.DictReader(io.StringIO(content))
    missing = [c for c in PROFILE_COLUMNS[:3] if c not in (reader.fieldnames or [])]
    if missing:
        raise ConfigError(f"profiles file missing columns {missing}")
    out = []
    for line_no, row in enumerate(reader, start=2):
        try:
            out.append(TaskProfile(
                label=row["label"].strip(),
                runtime_s=float(row["runtime_s"]),
                energy_kwh=float(row["energy_kwh"]),
                source=(row.get("source") or "measured").strip(),
            ))
        except ValueError as exc:
            raise ConfigError(f"profiles line {line_no}: {exc}") from None
    if not out:
        raise ConfigError("profiles file has no rows")
    return out


def load_profiles(path: str | Path) -> list[TaskProfile]:
    return parse_profiles(Path(path).read_text(encoding="utf-8"))


def profile_emissions(profile: TaskProfile, start: datetime, series: CISeries) -> float:
    """gCO2e of running ``profile`` from ``start``, energy spread uniformly."""
    a = to_ms(start)
    b = a + int(round(profile.runtime_s * 1000))
    return profile.energy_kwh * mean_intensity(series, a, b)


def _rank(entries: list[RankedProfile]) -> list[RankedProfile]:
    feasible = sorted(
        (e for e in entries if e.feasible),
        key=lambda e: (e.emissions_g, e.profile.runtime_s),
    )
    return feasible + [e for e in entries if not e.feasible]


def compare_profiles(
    profiles: Iterable[TaskProfile],
    start: datetime,
    series: CISeries,
) -> list[RankedProfile]:
    """Rank profiles by emissions when started at ``start``.

    Ties go to the shorter runtime. Profiles whose run leaves the series
    are kept at the end with ``emissions_g=None`` and the error message.
    """
    entries = []
    for p in profiles:
        try:
            entries.append(RankedProfile(p, profile_emissions(p, start, series)))
        except OutOfRange as exc:
            entries.append(RankedProfile(p, None, str(exc)))
    return _rank(entries)


def frequency_sweep(
    profiles: Mapping[float, TaskProfile],
    start: datetime,
    series: CISeries,
) -> list[RankedProfile]:
    """:func:`compare_profiles` over profiles keyed by frequency in GHz."""
    entries = []
    for ghz, p in profiles.items():
        try:
            entries.append(RankedProfile(p, profile_emissions(p, start, series), frequency_ghz=ghz))
        except OutOfRange as exc:
            entries.append(RankedProfile(p, None, str(exc), frequency_ghz=ghz))
    return _rank(entries)


@dataclass(frozen=True)
class ScaleRun:
    node_count: int
    trace: WorkflowTrace

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")


@dataclass(frozen=True)
class ScaleRow:
    nodes: int
    makespan_h: float
    energy_kwh: float
    avg_emissions_g: float | None
    marg_emissions_g: float | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "makespan_h": self.makespan_h,
            "energy_kwh": self.energy_kwh,
            "avg_emissions_g": self.avg_emissions_g,
            "marg_emissions_g": self.marg_emissions_g,
            "error": self.error,
        }


SCALE_COLUMNS = ("nodes", "makespan_h", "energy_kwh", "avg_emissions_g", "marg_emissions_g")


def cluster_scale_report(
    runs: Iterable[ScaleRun],
    avg_series: CISeries | None,
    marg_series: CISeries | None,
    *,
    pue: float = 1.0,
) -> list[ScaleRow]:
    """One row per run with makespan, energy and emissions per signal.

    A run that leaves either series gets ``None`` for that signal and an
    error note rather than aborting the table.
    """
    rows = []
    for run in sorted(runs, key=lambda r: r.node_count):
        emissions = {}
        errors = []
        for key, series in (("avg", avg_series), ("marg", marg_series)):
            if series is None:
                emissions[key] = None
                continue
            try:
                emissions[key] = workflow_footprint(run.trace, series, pue=pue).total_emissions_g
            except WorkflowCarbonError as exc:
                emissions[key] = None
                errors.append(f"{key}: {exc}")
        rows.append(ScaleRow(
            nodes=run.node_count,
            makespan_h=makespan(run.trace) / 3600,
            energy_kwh=workflow_energy(run.trace, pue).total_kwh,
            avg_emissions_g=emissions["avg"],
            marg_emissions_g=emissions["marg"],
            error="; ".join(errors) or None,
        ))
    return rows
