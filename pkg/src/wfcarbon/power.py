"""Linear CPU power model with a memory term.

A task holding ``c`` of a node's ``C`` cores at utilization ``u`` draws
``c/C * (P_idle + u * (P_max - P_idle))`` watts of CPU power, plus
``mem_GiB * coeff`` watts for the memory it holds.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

from .trace_model import GIB, NodeProfile, TaskRecord, WorkflowTrace, makespan

WH_PER_KWH = 1000.0
S_PER_H = 3600.0


@dataclass(frozen=True)
class PowerDraw:
    cpu_w: float
    mem_w: float

    @property
    def total_w(self) -> float:
        return self.cpu_w + self.mem_w


@dataclass(frozen=True)
class EnergyBreakdown:
    cpu_kwh: float = 0.0
    mem_kwh: float = 0.0

    @property
    def total_kwh(self) -> float:
        return self.cpu_kwh + self.mem_kwh

    def __add__(self, other: EnergyBreakdown) -> EnergyBreakdown:
        return EnergyBreakdown(self.cpu_kwh + other.cpu_kwh, self.mem_kwh + other.mem_kwh)

    def scaled(self, k: float) -> EnergyBreakdown:
        return EnergyBreakdown(self.cpu_kwh * k, self.mem_kwh * k)

    @staticmethod
    def total(parts: Iterable[EnergyBreakdown]) -> EnergyBreakdown:
        parts = list(parts)
        return EnergyBreakdown(
            math.fsum(p.cpu_kwh for p in parts), math.fsum(p.mem_kwh for p in parts)
        )


def task_power_w(task: TaskRecord, node: NodeProfile) -> PowerDraw:
    u = task.utilization
    share = task.cpus_allocated / node.cores
    cpu_w = share * (node.p_idle_w + u * (node.p_max_w - node.p_idle_w))
    mem_w = task.memory_bytes / GIB * node.mem_coeff_w_per_gb
    return PowerDraw(cpu_w, mem_w)


def task_energy(task: TaskRecord, node: NodeProfile, pue: float = 1.0) -> EnergyBreakdown:
    p = task_power_w(task, node)
    hours = task.duration_s / S_PER_H
    return EnergyBreakdown(
        p.cpu_w * hours * pue / WH_PER_KWH,
        p.mem_w * hours * pue / WH_PER_KWH,
    )


def workflow_energy(trace: WorkflowTrace, pue: float = 1.0) -> EnergyBreakdown:
    return EnergyBreakdown.total(task_energy(t, trace.node_of(t), pue) for t in trace.tasks)


def reserved_memory_power_w(nodes_in_use: Iterable[NodeProfile]) -> float:
    """Watts drawn by the full memory of every node in ``nodes_in_use``."""
    return math.fsum(n.total_mem_gb * n.mem_coeff_w_per_gb for n in nodes_in_use)


def reserved_memory_energy(
    trace: WorkflowTrace,
    nodes_in_use: Iterable[NodeProfile] | None = None,
    pue: float = 1.0,
) -> float:
    """kWh for holding all memory of the reserved nodes over the makespan.

    Defaults to the nodes the trace's tasks actually ran on.
    """
    if nodes_in_use is None:
        nodes_in_use = trace.nodes_in_use()
    hours = makespan(trace) / S_PER_H
    return reserved_memory_power_w(nodes_in_use) * hours * pue / WH_PER_KWH
