"""Carbon footprint estimation and carbon-aware shifting for workflow traces."""

from .ci_store import CISeries, Signal, ci_at, load_ci, overlap_weights, parse_ci, rebase_year
from .errors import (
    ConfigError,
    EmptyCISeries,
    EmptyTrace,
    InsufficientSlots,
    MissingColumn,
    NegativeIntensity,
    NoFeasibleOffset,
    NonUniformInterval,
    OutOfRange,
    UnknownNode,
    UnparseableRow,
    WorkflowCarbonError,
)
from .footprint import FootprintReport, task_emissions, workflow_footprint
from .power import EnergyBreakdown, reserved_memory_energy, task_energy, task_power_w, workflow_energy
from .shift_sim import (
    ExecutionWindow,
    ShiftResult,
    build_windows,
    interruption_overhead,
    select_slots,
    shift_interrupted,
    shift_whole,
)
from .trace_model import NodeProfile, TaskRecord, WorkflowTrace, load_roster, load_trace, makespan, parse_trace
from .whatif import (
    ScaleRun,
    TaskProfile,
    cluster_scale_report,
    compare_profiles,
    frequency_sweep,
    profile_emissions,
)

__version__ = "0.1.0"
