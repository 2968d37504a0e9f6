"""Workflow execution traces and node power profiles.

Traces are Nextflow ``trace.txt`` compatible tab-separated files. Node rosters
are YAML/JSON documents describing the linear power model of each machine.
"""

from __future__ import annotations

import csv
import io
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import yaml

from .errors import ConfigError, EmptyTrace, MissingColumn, UnknownNode, UnparseableRow
from .timeutil import from_ms, parse_instant, to_ms

DEFAULT_MEM_COEFF_W_PER_GB = 0.3725
GIB = 2**30

# Column aliases, most preferred first.
NAME_COLUMNS = ("name", "process")
START_COLUMNS = ("start",)
END_COLUMNS = ("complete", "end")
CPUS_COLUMNS = ("cpus",)
CPU_PCT_COLUMNS = ("%cpu",)
MEMORY_COLUMNS = ("peak_rss", "rss", "memory")
HOST_COLUMNS = ("hostname", "host", "node", "node_id")
ID_COLUMNS = ("task_id", "hash")

_SIZE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([KMGTP]?i?B?)?\s*$", re.IGNORECASE)
_SIZE_POWERS = {"": 0, "K": 1, "M": 2, "G": 3, "T": 4, "P": 5}


@dataclass(frozen=True)
class NodeProfile:
    node_id: str
    cores: int
    p_idle_w: float
    p_max_w: float
    mem_coeff_w_per_gb: float = DEFAULT_MEM_COEFF_W_PER_GB
    total_mem_gb: float = 0.0

    def __post_init__(self):
        if self.cores < 1:
            raise ConfigError(f"node {self.node_id}: cores must be >= 1")
        if not (self.p_max_w >= self.p_idle_w > 0):
            raise ConfigError(f"node {self.node_id}: require p_max_w >= p_idle_w > 0")
        if self.mem_coeff_w_per_gb < 0:
            raise ConfigError(f"node {self.node_id}: mem_coeff_w_per_gb must be >= 0")
        if self.total_mem_gb < 0:
            raise ConfigError(f"node {self.node_id}: total_mem_gb must be >= 0")

    def scaled(self, k: float) -> NodeProfile:
        """Copy with all power parameters multiplied by ``k``."""
        return replace(
            self,
            p_idle_w=self.p_idle_w * k,
            p_max_w=self.p_max_w * k,
            mem_coeff_w_per_gb=self.mem_coeff_w_per_gb * k,
        )


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    name: str
    start: datetime
    end: datetime
    cpus_allocated: int
    cpu_usage_pct: float
    memory_bytes: int
    node_id: str
    start_ms: int = field(init=False, repr=False, compare=False)
    end_ms: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "start_ms", to_ms(self.start))
        object.__setattr__(self, "end_ms", to_ms(self.end))
        if self.end_ms < self.start_ms:
            raise ValueError(f"task {self.task_id}: end before start")
        if self.cpus_allocated < 1:
            raise ValueError(f"task {self.task_id}: cpus_allocated must be >= 1")
        if self.cpu_usage_pct < 0:
            raise ValueError(f"task {self.task_id}: negative %cpu")
        if self.memory_bytes < 0:
            raise ValueError(f"task {self.task_id}: negative memory")

    @property
    def duration_s(self) -> float:
        return (self.end_ms - self.start_ms) / 1000.0

    @property
    def utilization(self) -> float:
        """CPU utilization fraction of the allocated cores, clamped to [0, 1]."""
        u = self.cpu_usage_pct / (100.0 * self.cpus_allocated)
        return min(max(u, 0.0), 1.0)


@dataclass(frozen=True)
class WorkflowTrace:
    tasks: tuple[TaskRecord, ...]
    nodes: Mapping[str, NodeProfile]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "nodes", dict(self.nodes))
        if not self.tasks:
            raise EmptyTrace()
        for task in self.tasks:
            node = self.nodes.get(task.node_id)
            if node is None:
                raise UnknownNode(task.node_id)
            if task.cpus_allocated > node.cores:
                raise ValueError(
                    f"task {task.task_id}: {task.cpus_allocated} cpus exceed "
                    f"{node.cores} cores of node {node.node_id}"
                )
            if node.total_mem_gb and task.memory_bytes > node.total_mem_gb * GIB:
                raise ValueError(
                    f"task {task.task_id}: memory exceeds node {node.node_id} total"
                )

    def node_of(self, task: TaskRecord) -> NodeProfile:
        return self.nodes[task.node_id]

    def nodes_in_use(self) -> list[NodeProfile]:
        used = {t.node_id for t in self.tasks}
        return [self.nodes[n] for n in sorted(used)]

    @property
    def start_ms(self) -> int:
        return min(t.start_ms for t in self.tasks)

    @property
    def end_ms(self) -> int:
        return max(t.end_ms for t in self.tasks)

    def with_tasks(self, tasks: Iterable[TaskRecord], label: str | None = None) -> WorkflowTrace:
        return WorkflowTrace(tuple(tasks), self.nodes, self.label if label is None else label)


def makespan(trace: WorkflowTrace) -> float:
    """Seconds from the earliest task start to the latest task end."""
    if not trace.tasks:
        raise EmptyTrace()
    return (trace.end_ms - trace.start_ms) / 1000.0


def parse_size(text: str) -> int:
    """Parse a byte count such as ``2147483648``, ``2 GB`` or ``1.5 MiB``.

    Unit suffixes use binary multiples, as Nextflow does.
    """
    m = _SIZE.match(text)
    if not m:
        raise ValueError(f"bad size {text!r}")
    number, unit = m.group(1), (m.group(2) or "").upper()
    prefix = unit[:1] if unit[:1] in _SIZE_POWERS and unit[:1] != "B" else ""
    return int(round(float(number) * 1024 ** _SIZE_POWERS[prefix]))


def _parse_pct(text: str) -> float:
    return float(text.strip().rstrip("%"))


def _pick(header: list[str], aliases: Iterable[str]) -> str | None:
    lowered = {h.strip().lower(): h for h in header}
    for alias in aliases:
        if alias in lowered:
            return lowered[alias]
    return None


def parse_trace(
    content: str,
    roster: Mapping[str, NodeProfile] | Iterable[NodeProfile],
    *,
    default_node: str | None = None,
    label: str = "",
    source: str | None = None,
) -> WorkflowTrace:
    """Parse tab-separated trace text into a :class:`WorkflowTrace`.

    Timestamps may be epoch milliseconds or ISO-8601. Memory is read from
    ``peak_rss`` when present, else ``rss``, else the requested ``memory``.
    Traces without a host column map every task to ``default_node`` (or the
    sole roster entry).
    """
    nodes = _roster_dict(roster)
    reader = csv.reader(io.StringIO(content), delimiter="\t")
    rows = [(i, r) for i, r in enumerate(reader, start=1) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyTrace("trace has no header")
    _, header = rows[0]
    header = [h.strip() for h in header]

    cols = {}
    for key, aliases in (
        ("name", NAME_COLUMNS),
        ("start", START_COLUMNS),
        ("end", END_COLUMNS),
        ("cpus", CPUS_COLUMNS),
        ("cpu_pct", CPU_PCT_COLUMNS),
        ("memory", MEMORY_COLUMNS),
    ):
        col = _pick(header, aliases)
        if col is None:
            raise MissingColumn(aliases[0], source)
        cols[key] = col
    host_col = _pick(header, HOST_COLUMNS)
    id_col = _pick(header, ID_COLUMNS)

    if host_col is None:
        if default_node is None:
            if len(nodes) != 1:
                raise MissingColumn(HOST_COLUMNS[0], source)
            default_node = next(iter(nodes))
        if default_node not in nodes:
            raise UnknownNode(default_node)

    index = {h: i for i, h in enumerate(header)}
    tasks = []
    for line_no, row in rows[1:]:
        def get(col: str) -> str:
            i = index[col]
            if i >= len(row):
                raise UnparseableRow(line_no, f"missing value for {col!r}")
            return row[i].strip()

        try:
            values = {key: get(col) for key, col in cols.items()}
            for key in ("start", "end", "cpus", "cpu_pct", "memory"):
                if values[key] in ("", "-"):
                    raise UnparseableRow(line_no, f"no value for {cols[key]!r}")
            start = parse_instant(values["start"])
            end = parse_instant(values["end"])
            cpus = int(values["cpus"])
            cpu_pct = _parse_pct(values["cpu_pct"])
            memory = parse_size(values["memory"])
        except UnparseableRow:
            raise
        except ValueError as exc:
            raise UnparseableRow(line_no, str(exc)) from None
        if end < start:
            raise UnparseableRow(line_no, "complete precedes start")
        node_id = get(host_col) if host_col else default_node
        node = nodes.get(node_id)
        if node is None:
            raise UnknownNode(node_id, line_no)
        if cpus < 1 or cpus > node.cores:
            raise UnparseableRow(line_no, f"cpus={cpus} outside 1..{node.cores}")
        if cpu_pct < 0 or memory < 0:
            raise UnparseableRow(line_no, "negative usage value")
        if node.total_mem_gb and memory > node.total_mem_gb * GIB:
            raise UnparseableRow(line_no, f"memory exceeds node {node_id} total")
        task_id = get(id_col) if id_col else str(len(tasks) + 1)
        tasks.append(
            TaskRecord(
                task_id=task_id,
                name=values["name"],
                start=start,
                end=end,
                cpus_allocated=cpus,
                cpu_usage_pct=cpu_pct,
                memory_bytes=memory,
                node_id=node_id,
            )
        )
    if not tasks:
        raise EmptyTrace()
    return WorkflowTrace(tuple(tasks), nodes, label)


def format_trace(trace: WorkflowTrace) -> str:
    """Serialize to canonical tab-separated text accepted by :func:`parse_trace`."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter="\t", lineterminator="\n")
    writer.writerow(["task_id", "name", "start", "complete", "cpus", "%cpu", "peak_rss", "hostname"])
    for t in trace.tasks:
        writer.writerow([
            t.task_id, t.name, t.start_ms, t.end_ms, t.cpus_allocated,
            repr(float(t.cpu_usage_pct)), t.memory_bytes, t.node_id,
        ])
    return out.getvalue()


def load_trace(path: str | Path, roster, **kwargs) -> WorkflowTrace:
    path = Path(path)
    kwargs.setdefault("label", path.stem)
    return parse_trace(path.read_text(encoding="utf-8"), roster, source=str(path), **kwargs)


def _roster_dict(roster) -> dict[str, NodeProfile]:
    if isinstance(roster, Mapping):
        return dict(roster)
    return {n.node_id: n for n in roster}


def parse_roster(document) -> dict[str, NodeProfile]:
    """Build node profiles from a parsed roster document.

    Accepts ``{"nodes": [...], "defaults": {...}}``, a bare list of node
    entries, or a mapping of node id to parameters. ``count`` on an entry
    expands it into ``<node_id>-1 .. <node_id>-N`` identical nodes.
    """
    defaults = {}
    entries = document
    if isinstance(document, Mapping) and "nodes" in document:
        defaults = dict(document.get("defaults") or {})
        entries = document["nodes"]
    if isinstance(entries, Mapping):
        entries = [{"node_id": k, **(v or {})} for k, v in entries.items()]
    if not isinstance(entries, list) or not entries:
        raise ConfigError("node roster must contain at least one node")

    nodes: dict[str, NodeProfile] = {}
    for raw in entries:
        if not isinstance(raw, Mapping):
            raise ConfigError(f"bad roster entry: {raw!r}")
        entry = {**defaults, **raw}
        count = int(entry.pop("count", 1))
        try:
            base_id = str(entry.pop("node_id"))
            params = dict(
                cores=int(entry.pop("cores")),
                p_idle_w=float(entry.pop("p_idle_w")),
                p_max_w=float(entry.pop("p_max_w")),
                mem_coeff_w_per_gb=float(entry.pop("mem_coeff_w_per_gb", DEFAULT_MEM_COEFF_W_PER_GB)),
                total_mem_gb=float(entry.pop("total_mem_gb", 0.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"roster entry missing {exc.args[0]!r}") from None
        if entry:
            raise ConfigError(f"unknown roster keys: {sorted(entry)}")
        ids = [base_id] if count == 1 else [f"{base_id}-{i}" for i in range(1, count + 1)]
        for node_id in ids:
            if node_id in nodes:
                raise ConfigError(f"duplicate node id {node_id!r}")
            nodes[node_id] = NodeProfile(node_id=node_id, **params)
    return nodes


def load_roster(path: str | Path) -> dict[str, NodeProfile]:
    path = Path(path)
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_roster(document)


def shift_trace(trace: WorkflowTrace, offset_ms: int) -> WorkflowTrace:
    """Copy of ``trace`` with every task moved by ``offset_ms``."""
    return trace.with_tasks(
        replace(t, start=from_ms(t.start_ms + offset_ms), end=from_ms(t.end_ms + offset_ms))
        for t in trace.tasks
    )
