"""Run counters, per-run reports and multi-seed aggregation."""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

CONTROL_KINDS = ("RREQ", "RREP", "RERR", "FRQ", "FRP", "ALARM")


class MixedScenarios(ValueError):
    pass


@dataclass
class Counters:
    data_generated: int = 0
    data_delivered: int = 0
    drop_no_route: int = 0
    drop_malicious: int = 0
    drop_buffer: int = 0
    # unicast frames lost on the air: next hop out of range or random loss
    drop_link: int = 0
    in_flight_at_end: int = 0
    control_tx: Counter = field(default_factory=Counter)
    false_rreps_sent: int = 0
    poisoned_nodes: set[int] = field(default_factory=set)
    flagged: set[int] = field(default_factory=set)
    attacking_blackholes: set[int] = field(default_factory=set)
    sessions_opened: int = 0
    verdicts: Counter = field(default_factory=Counter)

    def accounted(self) -> int:
        return (
            self.data_delivered
            + self.drop_no_route
            + self.drop_malicious
            + self.drop_buffer
            + self.drop_link
            + self.in_flight_at_end
        )

    def conservation_holds(self) -> bool:
        return self.data_generated == self.accounted()


@dataclass(frozen=True)
class NodeRoster:
    labels: tuple[str, ...]
    blackholes: frozenset[int]

    @property
    def honest(self) -> frozenset[int]:
        return frozenset(range(len(self.labels))) - self.blackholes

    def render(self, nodes: set[int] | frozenset[int]) -> str:
        return ";".join(self.labels[n] for n in sorted(nodes))


@dataclass(frozen=True)
class MetricsReport:
    pdr: float
    false_rrep_count: int
    poisoned_node_count: int
    false_positive_rate: float
    false_negative_rate: float
    control_overhead_pct: float
    control_overhead_incl_hello_pct: float
    counters: Counters
    roster: NodeRoster
    scenario: Any = None
    seed: Any = None

    def as_row(self) -> dict[str, Any]:
        """Flat CSV-ready record of every reported measure."""
        c = self.counters
        row: dict[str, Any] = {
            "pdr": self.pdr,
            "false_rrep_count": self.false_rrep_count,
            "poisoned_node_count": self.poisoned_node_count,
            "false_positive_rate": self.false_positive_rate,
            "false_negative_rate": self.false_negative_rate,
            "control_overhead_pct": self.control_overhead_pct,
            "control_overhead_incl_hello_pct": self.control_overhead_incl_hello_pct,
            "data_generated": c.data_generated,
            "data_delivered": c.data_delivered,
            "drop_no_route": c.drop_no_route,
            "drop_malicious": c.drop_malicious,
            "drop_buffer": c.drop_buffer,
            "drop_link": c.drop_link,
            "in_flight_at_end": c.in_flight_at_end,
            "control_tx": sum(c.control_tx[k] for k in CONTROL_KINDS),
            "hello_tx": c.control_tx["HELLO"],
        }
        for kind in CONTROL_KINDS:
            row[f"{kind.lower()}_tx"] = c.control_tx[kind]
        row["sessions_opened"] = c.sessions_opened
        row["flagged"] = self.roster.render(c.flagged)
        row["attacking_blackholes"] = self.roster.render(c.attacking_blackholes)
        row["poisoned_nodes"] = self.roster.render(c.poisoned_nodes)
        return row


REPORT_COLUMNS = tuple(
    MetricsReport(0.0, 0, 0, 0.0, 0.0, 0.0, 0.0, Counters(), NodeRoster((), frozenset())).as_row()
)
SET_COLUMNS = ("flagged", "attacking_blackholes", "poisoned_nodes")


def finalize(counters: Counters, roster: NodeRoster, scenario: Any = None, seed: Any = None) -> MetricsReport:
    c = counters
    pdr = c.data_delivered / c.data_generated if c.data_generated else 0.0
    honest = roster.honest
    fp = len(honest & c.flagged) / len(honest) if honest else 0.0
    attackers = c.attacking_blackholes
    fn = len(attackers - c.flagged) / len(attackers) if attackers else 0.0
    control = sum(c.control_tx[k] for k in CONTROL_KINDS)
    denom = max(1, c.data_delivered)
    return MetricsReport(
        pdr=pdr,
        false_rrep_count=c.false_rreps_sent,
        poisoned_node_count=len(c.poisoned_nodes),
        false_positive_rate=fp,
        false_negative_rate=fn,
        control_overhead_pct=100.0 * control / denom,
        control_overhead_incl_hello_pct=100.0 * (control + c.control_tx["HELLO"]) / denom,
        counters=c,
        roster=roster,
        scenario=scenario,
        seed=seed,
    )


@dataclass(frozen=True)
class Stats:
    mean: float
    min: float
    max: float
    stddev: float


@dataclass(frozen=True)
class Summary:
    count: int
    stats: dict[str, Stats]
    sets: dict[str, str]

    def __getitem__(self, metric: str) -> Stats:
        return self.stats[metric]


def _same_scenario(a: Any, b: Any) -> bool:
    if a is None or b is None:
        return a is b
    try:
        return replace(a, seed=0) == replace(b, seed=0)
    except TypeError:
        return a == b


def aggregate(reports: Sequence[MetricsReport]) -> Summary:
    """Per-metric mean/min/max/population stddev, summed in seed order."""
    if not reports:
        raise ValueError("nothing to aggregate")
    first = reports[0].scenario
    for r in reports[1:]:
        if not _same_scenario(first, r.scenario):
            raise MixedScenarios("reports come from different scenarios")
    ordered = sorted(reports, key=lambda r: (str(type(r.seed)), r.seed))
    rows = [r.as_row() for r in ordered]
    stats = {}
    for col in REPORT_COLUMNS:
        if col in SET_COLUMNS:
            continue
        values = [float(row[col]) for row in rows]
        mean = math.fsum(values) / len(values)
        std = statistics.pstdev(values, mu=mean) if len(values) > 1 else 0.0
        stats[col] = Stats(mean, min(values), max(values), std)
    sets = {}
    for col in SET_COLUMNS:
        members: set[str] = set()
        for row in rows:
            if row[col]:
                members.update(row[col].split(";"))
        # keep the roster's node order rather than string order
        order = {label: i for i, label in enumerate(ordered[0].roster.labels)}
        sets[col] = ";".join(sorted(members, key=lambda m: order.get(m, len(order))))
    return Summary(len(rows), stats, sets)


def summary_rows(summary: Summary) -> list[tuple[str, dict[str, Any]]]:
    """Four labelled CSV records (mean, min, max, stddev) for one summary."""
    out = []
    for which in ("mean", "min", "max", "stddev"):
        row: dict[str, Any] = {col: getattr(s, which) for col, s in summary.stats.items()}
        row.update(summary.sets)
        out.append((which, row))
    return out
