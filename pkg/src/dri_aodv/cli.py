"""Command-line runner: single scenarios, seed replications, sweeps, fixtures."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from . import fixtures
from .metrics import REPORT_COLUMNS, MetricsReport, aggregate, summary_rows
from .scenario import (
    FIELD_TYPES,
    Scenario,
    _parse_value,
    csv_value,
    format_scenario,
    parse_scenario,
)
from .simkernel import Simulator

MODES = ("baseline", "attack", "defense")
SCENARIO_COLUMNS = tuple(k for k in FIELD_TYPES if k not in ("seed", "mode"))
CSV_COLUMNS = ("seed", "mode") + SCENARIO_COLUMNS + REPORT_COLUMNS
SUMMARY_METRICS = (
    "pdr",
    "false_rrep_count",
    "poisoned_node_count",
    "false_positive_rate",
    "false_negative_rate",
    "control_overhead_pct",
)


def parse_seeds(text: str) -> list[int]:
    """``1-5`` or ``1,3,7`` or a mix such as ``1-3,10``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            if int(hi) < int(lo):
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    if len(set(seeds)) != len(seeds):
        raise argparse.ArgumentTypeError("duplicate seeds")
    return seeds


def _run_cell(args: tuple[Scenario, int, Optional[str]]) -> MetricsReport:
    scenario, seed, log_path = args
    if log_path is None:
        return Simulator(scenario, seed).run()
    with open(log_path, "w") as log:
        return Simulator(scenario, seed, log=log).run()


def run_cells(
    cells: Sequence[tuple[Scenario, int, Optional[str]]], jobs: int = 1
) -> list[MetricsReport]:
    """Run every (scenario, seed) cell; results keep the input order."""
    if jobs <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, cells))


def report_row(report: MetricsReport, seed: Any = None) -> dict[str, Any]:
    s = report.scenario
    row: dict[str, Any] = {"seed": report.seed if seed is None else seed, "mode": s.mode}
    for key in SCENARIO_COLUMNS:
        row[key] = csv_value(s, key)
    row.update(report.as_row())
    return row


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_rows(groups: Iterable[list[MetricsReport]]) -> list[dict[str, str]]:
    """Per-run rows, each group followed by its mean/min/max/stddev rows."""
    rows = []
    for reports in groups:
        for r in reports:
            rows.append(report_row(r))
        summary = aggregate(reports)
        base = report_row(reports[0])
        for label, agg in summary_rows(summary):
            row = dict(base)
            row.update(agg)
            row["seed"] = label
            rows.append(row)
    return [{k: _fmt(row[k]) for k in CSV_COLUMNS} for row in rows]


def write_csv(rows: list[dict[str, str]], out: Optional[str]) -> None:
    if out is None:
        return
    tmp = f"{out}.partial"
    try:
        with open(tmp, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp, out)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _log_path(args: argparse.Namespace, scenario: Scenario, seed: int, tag: str) -> Optional[str]:
    if not args.verbose_events:
        return None
    stem = Path(args.out).with_suffix("") if args.out else Path("events")
    return f"{stem}.{tag}{scenario.mode}.seed{seed}.events"


def print_summary(groups: list[list[MetricsReport]], label: str = "", stream=None) -> None:
    stream = stream or sys.stdout
    header = f"{label:>14} {'mode':>8} " + " ".join(f"{m:>22}" for m in SUMMARY_METRICS)
    print(header, file=stream)
    for reports in groups:
        summary = aggregate(reports)
        s = reports[0].scenario
        tag = f"{getattr(s, label)}" if label else ""
        cells = " ".join(f"{summary[m].mean:>13.4f} ±{summary[m].stddev:>7.4f}" for m in SUMMARY_METRICS)
        print(f"{tag:>14} {s.mode:>8} {cells}", file=stream)
        if summary.sets["flagged"]:
            print(f"{'':>14} {'':>8} flagged: {summary.sets['flagged']}", file=stream)


# -- commands ---------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    scenario = parse_scenario(args.scenario)
    cells = [(scenario, seed, _log_path(args, scenario, seed, "")) for seed in args.seeds]
    reports = run_cells(cells, args.jobs)
    write_csv(csv_rows([reports]), args.out)
    print_summary([reports])
    return 0


def parse_sweep_values(key: str, text: str, labels: tuple[str, ...]) -> list[Any]:
    if key not in FIELD_TYPES or key == "seed":
        raise ValueError(f"cannot sweep {key!r}: not a scenario field")
    sep = ";" if key in ("positions", "flow_list", "dri_history") else ","
    return [_parse_value(key, v.strip(), labels) for v in text.split(sep) if v.strip()]


def cmd_sweep(args: argparse.Namespace) -> int:
    base = parse_scenario(args.scenario)
    values = parse_sweep_values(args.key, args.values, base.labels)
    modes = [m.strip() for m in args.modes.split(",")]
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}")
    scenarios = [base.with_overrides(**{args.key: v, "mode": m}) for v in values for m in modes]
    cells = [
        (s, seed, _log_path(args, s, seed, f"{args.key}={csv_value(s, args.key)}."))
        for s in scenarios
        for seed in args.seeds
    ]
    flat = run_cells(cells, args.jobs)
    n = len(args.seeds)
    groups = [flat[i : i + n] for i in range(0, len(flat), n)]
    write_csv(csv_rows(groups), args.out)
    print_summary(groups, args.key)
    return 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "fig6.scenario": (fixtures.fig6_topology().scenario("defense"), "Two colluding black holes, defense on"),
        "table2.scenario": (fixtures.table_ii_scenario("attack"), "Default 30-node mobile scenario"),
        "line5.scenario": (fixtures.line_topology().scenario("baseline"), "Five-node chain, honest"),
        "grid3x4.scenario": (fixtures.grid_topology().scenario("baseline"), "3x4 lattice, honest"),
    }
    for name, (scenario, header) in files.items():
        (out / name).write_text(format_scenario(scenario, header))
        print(out / name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dri-aodv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("scenario", help="scenario file (key = value lines)")
        sp.add_argument("--seeds", type=parse_seeds, default=parse_seeds("1-5"), help="e.g. 1-5 or 1,4,9")
        sp.add_argument("--out", help="CSV output path")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument(
            "--verbose-events",
            action="store_true",
            help="write a per-run event log next to the CSV",
        )

    run = sub.add_parser("run", help="run one scenario over several seeds")
    common(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="sweep one field across all three modes")
    common(sweep)
    sweep.add_argument("--key", required=True, help="scenario field to vary")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--modes", default=",".join(MODES))
    sweep.set_defaults(func=cmd_sweep)

    fx = sub.add_parser("fixtures", help="write the built-in scenarios as files")
    fx.add_argument("outdir", nargs="?", default=".")
    fx.set_defaults(func=cmd_fixtures)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # every failure becomes a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
