"""Carbon footprint and temporal-shifting simulator for workflow traces.

    wfcarbon estimate        --trace T --nodes N.yaml --ci CI.csv --zone Z
    wfcarbon shift           ... --flexibility-h 24
    wfcarbon interrupt       ... --flexibility-h 96
    wfcarbon whatif          --profiles P.csv --start ISO --ci CI.csv --zone Z
    wfcarbon cluster-compare --run 2=t2.txt --run 8=t8.txt --avg-ci A.csv --marg-ci M.csv
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import report_io
from .ci_store import CISeries, Signal, load_ci, rebase_year
from .errors import ConfigError, WorkflowCarbonError
from .footprint import workflow_footprint
from .shift_sim import per_side_hours, shift_interrupted, shift_whole
from .timeutil import from_ms, parse_instant, to_ms
from .trace_model import WorkflowTrace, load_roster, load_trace
from .whatif import ScaleRun, cluster_scale_report, compare_profiles, frequency_sweep, load_profiles

NODES_ENV = "WFCARBON_NODES"
COMMANDS = ("estimate", "shift", "interrupt", "whatif", "cluster-compare")
_GHZ = re.compile(r"(\d+(?:\.\d+)?)\s*ghz", re.IGNORECASE)


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"no such file: {path}")
    return p


def rebase_trace(trace: WorkflowTrace, year: int) -> WorkflowTrace:
    return trace.with_tasks(
        replace(t, start=rebase_year(t.start, year), end=rebase_year(t.end, year)) for t in trace.tasks
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfcarbon", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", "-o", help="report path (default: stdout)")
    common.add_argument("--plot-data", help="write plot-ready CSV here")
    common.add_argument("--fill-gaps", action="store_true", help="carry values forward over CI gaps")
    common.add_argument("--pue", type=float, default=1.0)

    ci = argparse.ArgumentParser(add_help=False)
    ci.add_argument("--ci", required=True, help="carbon-intensity CSV")
    ci.add_argument("--zone", required=True)

    traced = argparse.ArgumentParser(add_help=False)
    traced.add_argument("--trace", required=True)
    traced.add_argument("--nodes", default=os.environ.get(NODES_ENV),
                        help=f"node roster (YAML/JSON); default ${NODES_ENV}")
    traced.add_argument("--default-node", help="node for traces without a host column")
    traced.add_argument("--rebase-year", type=int)
    traced.add_argument("--signal", choices=[s.value for s in Signal], default="average")

    flex = argparse.ArgumentParser(add_help=False)
    flex.add_argument("--flexibility-h", type=float, required=True)
    flex.add_argument("--convention", choices=("per-side", "total"), default="per-side",
                      help="flexibility as ±hours (per-side) or full window width (total)")

    p = sub.add_parser("estimate", parents=[common, ci, traced], help="baseline footprint")
    p.add_argument("--reserved-memory", action="store_true", help="also report reserved-node memory")

    p = sub.add_parser("shift", parents=[common, ci, traced, flex], help="whole-workflow shifting")
    p.add_argument("--step-s", type=float, default=3600)

    p = sub.add_parser("interrupt", parents=[common, ci, traced, flex], help="interrupted shifting")
    p.add_argument("--window-s", type=float, help="execution window length (default: CI slot length)")

    p = sub.add_parser("whatif", parents=[common, ci], help="compare task profiles")
    p.add_argument("--profiles", required=True)
    p.add_argument("--start", required=True, help="ISO-8601 start instant")
    p.add_argument("--signal", choices=[s.value for s in Signal], default="marginal")
    p.add_argument("--frequencies", action="store_true", help="treat labels as frequencies (e.g. 2.0GHz)")

    p = sub.add_parser("cluster-compare", parents=[common], help="compare cluster sizes")
    p.add_argument("--run", action="append", required=True, metavar="NODES=TRACE")
    p.add_argument("--nodes", default=os.environ.get(NODES_ENV))
    p.add_argument("--default-node")
    p.add_argument("--rebase-year", type=int)
    p.add_argument("--avg-ci")
    p.add_argument("--marg-ci")
    p.add_argument("--zone", required=True)
    return parser


def _load_series(path: str, signal: str, zone: str, fill_gaps: bool) -> CISeries:
    return load_ci(_existing(path), signal, zone, fill_gaps=fill_gaps)


def _load_trace(args, path: str) -> tuple[WorkflowTrace, dict]:
    if not args.nodes:
        raise ConfigError(f"--nodes not given and ${NODES_ENV} unset")
    roster = load_roster(_existing(args.nodes))
    trace = load_trace(_existing(path), roster, default_node=args.default_node)
    if args.rebase_year is not None:
        trace = rebase_trace(trace, args.rebase_year)
    return trace, {k: asdict(v) for k, v in roster.items()}


def _base_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("output", "plot_data", "format")}


def _estimate(args):
    trace, nodes = _load_trace(args, args.trace)
    series = _load_series(args.ci, args.signal, args.zone, args.fill_gaps)
    report = workflow_footprint(trace, series, pue=args.pue, include_reserved=args.reserved_memory)
    cfg = {**_base_config(args), "node_profiles": nodes}
    return {"config": cfg, "report": report.to_dict()}, report.csv_rows(), None


def _shift(args):
    trace, nodes = _load_trace(args, args.trace)
    series = _load_series(args.ci, args.signal, args.zone, args.fill_gaps)
    hours = per_side_hours(args.flexibility_h, args.convention)
    result = shift_whole(trace, series, hours, args.step_s, pue=args.pue)
    cfg = {**_base_config(args), "flexibility_per_side_h": hours, "node_profiles": nodes,
           "filled_ci_slots": len(series.filled)}
    return {"config": cfg, "result": result.to_dict()}, result.csv_rows(), result.plot_rows()


def _interrupt(args):
    trace, nodes = _load_trace(args, args.trace)
    series = _load_series(args.ci, args.signal, args.zone, args.fill_gaps)
    hours = per_side_hours(args.flexibility_h, args.convention)
    result = shift_interrupted(trace, series, hours, window_s=args.window_s, pue=args.pue)
    cfg = {**_base_config(args), "flexibility_per_side_h": hours, "node_profiles": nodes,
           "filled_ci_slots": len(series.filled)}
    return {"config": cfg, "result": result.to_dict()}, result.csv_rows(), result.plot_rows()


def _whatif(args):
    profiles = load_profiles(_existing(args.profiles))
    series = _load_series(args.ci, args.signal, args.zone, args.fill_gaps)
    start = parse_instant(args.start)
    if args.frequencies:
        keyed = {}
        for p in profiles:
            m = _GHZ.search(p.label)
            if not m:
                raise ConfigError(f"profile label {p.label!r} has no frequency")
            keyed[float(m.group(1))] = p
        ranking = frequency_sweep(keyed, start, series)
    else:
        ranking = compare_profiles(profiles, start, series)
    rows = [r.to_dict() for r in ranking]
    header = ["rank", "label", "runtime_s", "energy_kwh", "source", "emissions_g", "feasible"]
    table = [[i + 1] + [r[h] for h in header[1:]] for i, r in enumerate(rows)]
    return ({"config": _base_config(args), "ranking": rows}, (header, table),
            _whatif_plot(ranking, start, series))


def _whatif_plot(ranking, start, series: CISeries):
    """One row per CI slot over the plotted range, marking each profile's run."""
    a = to_ms(start)
    b = a + max(int(round(r.profile.runtime_s * 1000)) for r in ranking)
    lo = max(series.start_ms, a - series.interval_ms * 6)
    hi = min(series.end_ms, b + series.interval_ms * 6)
    labels = [r.profile.label for r in ranking]
    header = ["slot_start", "intensity"] + [f"running:{label}" for label in labels]
    rows = []
    i = max(0, (lo - series.start_ms) // series.interval_ms)
    while i < len(series) and series.slot_start_ms(i) < hi:
        s = series.slot_start_ms(i)
        e = s + series.interval_ms
        marks = [a < e and s < a + int(round(r.profile.runtime_s * 1000)) for r in ranking]
        rows.append([from_ms(s), series.values[i]] + marks)
        i += 1
    return header, rows


def _parse_run(spec: str) -> tuple[int, str]:
    count, sep, path = spec.partition("=")
    if not sep or not count.strip().isdigit():
        raise ConfigError(f"--run expects NODES=TRACE, got {spec!r}")
    return int(count), path


def _cluster(args):
    if not (args.avg_ci or args.marg_ci):
        raise ConfigError("cluster-compare needs --avg-ci and/or --marg-ci")
    runs = []
    nodes = {}
    for spec in args.run:
        count, path = _parse_run(spec)
        trace, nodes = _load_trace(args, path)
        runs.append(ScaleRun(count, trace))
    avg = _load_series(args.avg_ci, "average", args.zone, args.fill_gaps) if args.avg_ci else None
    marg = _load_series(args.marg_ci, "marginal", args.zone, args.fill_gaps) if args.marg_ci else None
    rows = cluster_scale_report(runs, avg, marg, pue=args.pue)
    header = ["nodes", "makespan_h", "energy_kwh", "avg_emissions_g", "marg_emissions_g"]
    table = [[r.to_dict()[h] for h in header] for r in rows]
    cfg = {**_base_config(args), "node_profiles": nodes}
    return {"config": cfg, "rows": [r.to_dict() for r in rows]}, (header, table), None


HANDLERS = {
    "estimate": _estimate,
    "shift": _shift,
    "interrupt": _interrupt,
    "whatif": _whatif,
    "cluster-compare": _cluster,
}


def emit_plot_data(plot: tuple[list[str], list[list]], path: str | Path) -> Path:
    header, rows = plot
    path = Path(path)
    path.write_text(report_io.csv_text(header, rows), encoding="utf-8")
    return path


def _fail(exc: Exception, code: int) -> int:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, WorkflowCarbonError):
        record["context"] = exc.context()
    sys.stderr.write(report_io.dumps(record))
    return code


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        document, table, plot = HANDLERS[args.command](args)
        if args.format == "json":
            text = report_io.dumps(document)
        else:
            text = report_io.csv_text(*table)
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        if args.plot_data:
            if plot is None:
                raise ConfigError(f"{args.command} has no plot data")
            emit_plot_data(plot, args.plot_data)
    except ConfigError as exc:
        return _fail(exc, 2)
    except WorkflowCarbonError as exc:
        return _fail(exc, 1)
    except (OSError, ValueError) as exc:
        return _fail(exc, 1)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
