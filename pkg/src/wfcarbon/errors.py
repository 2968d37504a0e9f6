"""Exception types raised across the package.

Every error carries enough context (file, line, slot, instant) for the CLI to
emit a machine-readable failure record.
"""

from __future__ import annotations


class WorkflowCarbonError(Exception):
    """Base class for all domain errors."""

    def context(self) -> dict:
        return {}


class MissingColumn(WorkflowCarbonError):
    def __init__(self, name: str, source: str | None = None):
        self.name = name
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"missing required column {name!r}{where}")

    def context(self) -> dict:
        return {"column": self.name, "source": self.source}


class UnparseableRow(WorkflowCarbonError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")

    def context(self) -> dict:
        return {"line": self.line_no, "reason": self.reason}


class UnknownNode(WorkflowCarbonError):
    def __init__(self, node_id: str, line_no: int | None = None):
        self.node_id = node_id
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"node {node_id!r} not in roster{where}")

    def context(self) -> dict:
        return {"node_id": self.node_id, "line": self.line_no}


class EmptyTrace(WorkflowCarbonError):
    def __init__(self, message: str = "trace contains no tasks"):
        super().__init__(message)


class NonUniformInterval(WorkflowCarbonError):
    def __init__(self, at, expected_s: float, found_s: float):
        self.at = at
        self.expected_s = expected_s
        self.found_s = found_s
        super().__init__(
            f"non-uniform interval at {at}: expected {expected_s:g}s, found {found_s:g}s"
        )

    def context(self) -> dict:
        return {"at": str(self.at), "expected_s": self.expected_s, "found_s": self.found_s}


class NegativeIntensity(WorkflowCarbonError):
    def __init__(self, at, value: float):
        self.at = at
        self.value = value
        super().__init__(f"negative intensity {value} at {at}")

    def context(self) -> dict:
        return {"at": str(self.at), "value": self.value}


class EmptyCISeries(WorkflowCarbonError):
    def __init__(self, message: str = "carbon-intensity series contains no rows"):
        super().__init__(message)


class OutOfRange(WorkflowCarbonError):
    def __init__(self, t, coverage: tuple | None = None):
        self.t = t
        self.coverage = coverage
        extra = f"; coverage is [{coverage[0]}, {coverage[1]})" if coverage else ""
        super().__init__(f"{t} outside carbon-intensity coverage{extra}")

    def context(self) -> dict:
        ctx = {"t": str(self.t)}
        if self.coverage:
            ctx["coverage"] = [str(c) for c in self.coverage]
        return ctx


class NoFeasibleOffset(WorkflowCarbonError):
    def __init__(self, skipped: int):
        self.skipped = skipped
        super().__init__(f"all {skipped} candidate offsets leave carbon-intensity coverage")

    def context(self) -> dict:
        return {"skipped": self.skipped}


class InsufficientSlots(WorkflowCarbonError):
    def __init__(self, needed: int, available: int):
        self.needed = needed
        self.available = available
        super().__init__(f"need {needed} slots in flexibility range, only {available} available")

    def context(self) -> dict:
        return {"needed": self.needed, "available": self.available}


class ConfigError(WorkflowCarbonError):
    pass
