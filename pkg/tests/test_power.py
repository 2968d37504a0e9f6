import random
from dataclasses import replace
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_task_kwh, random_trace
from wfcarbon.power import (
    EnergyBreakdown,
    reserved_memory_energy,
    task_energy,
    task_power_w,
    workflow_energy,
)
from wfcarbon.trace_model import NodeProfile, TaskRecord, WorkflowTrace

UTC = timezone.utc
T0 = datetime(2023, 5, 1, 10, tzinfo=UTC)
NODE = NodeProfile("n", cores=16, p_idle_w=60, p_max_w=200, mem_coeff_w_per_gb=0.4, total_mem_gb=128)


def task(pct=800.0, cpus=8, mem=10 * 2**30, hours=2.0, **kw):
    return TaskRecord(
        task_id=kw.get("task_id", "t"), name="T", start=T0, end=T0 + timedelta(hours=hours),
        cpus_allocated=cpus, cpu_usage_pct=pct, memory_bytes=mem, node_id="n",
    )


def test_power_example():
    # 8/16 * (60 + 1.0 * 140) = 100 W; 10 GiB * 0.4 = 4 W
    p = task_power_w(task(), NODE)
    assert p.cpu_w == 100.0
    assert p.mem_w == 4.0


def test_power_endpoints():
    assert task_power_w(task(pct=0), NODE).cpu_w == 8 / 16 * 60
    assert task_power_w(task(pct=800), NODE).cpu_w == 8 / 16 * 200
    # over-reporting is clamped at full utilization
    assert task_power_w(task(pct=1200), NODE).cpu_w == 8 / 16 * 200


def test_energy_example():
    e = task_energy(task(), NODE)
    assert e.cpu_kwh == pytest.approx(0.200, rel=1e-12)
    assert e.mem_kwh == pytest.approx(0.008, rel=1e-12)
    assert e.total_kwh == pytest.approx(0.208, rel=1e-12)


def test_zero_duration_and_pue():
    assert task_energy(task(hours=0), NODE).total_kwh == 0
    assert task_energy(task(), NODE, pue=1.5).total_kwh == pytest.approx(0.312)


def test_single_task_workflow():
    trace = WorkflowTrace((task(),), {"n": NODE})
    assert workflow_energy(trace) == task_energy(task(), NODE)


def test_reserved_memory_example():
    nodes = [replace(NODE, node_id=f"n{i}") for i in range(8)]
    t = task(hours=3.13)
    trace = WorkflowTrace((t,), {"n": NODE})
    # 8 * 128 GB * 0.4 W/GB * 3.13 h = 1282.048 Wh
    assert reserved_memory_energy(trace, nodes) == pytest.approx(1.282048, rel=1e-12)
    assert reserved_memory_energy(WorkflowTrace((task(hours=0),), {"n": NODE}), nodes) == 0


def test_reserved_memory_defaults_to_used_nodes():
    trace = WorkflowTrace((task(hours=1),), {"n": NODE, "idle": replace(NODE, node_id="idle")})
    assert reserved_memory_energy(trace) == pytest.approx(128 * 0.4 / 1000)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_workflow_energy_additive_and_matches_exact(seed):
    rng = random.Random(seed)
    trace = random_trace(rng, 10)
    total = workflow_energy(trace)
    parts = [task_energy(t, trace.node_of(t)) for t in trace.tasks]
    assert total.total_kwh == pytest.approx(sum(p.total_kwh for p in parts), rel=1e-12)
    exact = sum(exact_task_kwh(t, trace.node_of(t)) for t in trace.tasks)
    assert total.total_kwh == pytest.approx(float(exact), rel=1e-12, abs=1e-15)
    # any partition adds up to the whole
    cut = rng.randint(0, len(trace.tasks))
    tasks = list(trace.tasks)
    rng.shuffle(tasks)
    halves = [tasks[:cut], tasks[cut:]]
    split = EnergyBreakdown.total(
        workflow_energy(trace.with_tasks(h)) for h in halves if h
    )
    assert split.total_kwh == pytest.approx(total.total_kwh, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    pct=st.floats(0, 1600), dpct=st.floats(0, 400),
    mem=st.integers(0, 2**36), dmem=st.integers(0, 2**30),
    hours=st.floats(0, 48), dh=st.floats(0, 5),
)
def test_energy_monotone(pct, dpct, mem, dmem, hours, dh):
    base = task_energy(task(pct=pct, mem=mem, hours=hours), NODE).total_kwh
    assert task_energy(task(pct=pct + dpct, mem=mem, hours=hours), NODE).total_kwh >= base
    assert task_energy(task(pct=pct, mem=mem + dmem, hours=hours), NODE).total_kwh >= base
    assert task_energy(task(pct=pct, mem=mem, hours=hours + dh), NODE).total_kwh >= base - 1e-15


def test_breakdown_total_invariant():
    e = EnergyBreakdown(0.1, 0.2)
    assert e.total_kwh == pytest.approx(0.3, rel=1e-12)
    assert (e + e).cpu_kwh == 0.2
