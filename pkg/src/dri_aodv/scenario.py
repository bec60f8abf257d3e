"""Scenario configuration and its flat ``key = value`` file format.

Keys not present in a file take the default simulation parameters
(30 nodes on a 1000 m square, 200 m radio range, 15 CBR flows at
2 packets/s of 512 bytes, 1000 s runs, 10 s pauses, 2 black holes).
Tuple-valued keys used by hand-built topologies:

``labels``        ``S, 1, 2, B_1``
``positions``     ``x y; x y; ...`` in node-id order (makes the run static)
``blackhole_ids`` ``B_1, B_2`` (labels or numeric ids)
``flow_list``     ``src dst start stop; ...``
``dri_history``   ``node peer bits; ...`` with bits such as ``01``
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .aodv import ProtocolConfig

MODES = ("baseline", "attack", "defense")
COLLUSION = ("group", "chain")


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class FlowDef:
    src: int
    dst: int
    start: float
    stop: float


@dataclass(frozen=True)
class Scenario:
    duration_s: float = 1000.0
    arena_m: float = 1000.0
    nodes: int = 30
    range_m: float = 200.0
    speed_min_mps: float = 1.0
    speed_max_mps: float = 10.0
    pause_s: float = 10.0
    flows: int = 15
    rate_pps: float = 2.0
    payload_b: int = 512
    blackhole_count: int = 2
    blackhole_ids: tuple[int, ...] = ()
    mode: str = "baseline"
    seed: int = 1
    warmup_s: float = 100.0
    flow_start_spread_s: float = 10.0
    # 0 means flows run until the end of the simulation
    flow_duration_s: float = 0.0
    # protocol constants
    hello_interval_s: float = 1.0
    allowed_hello_loss: int = 3
    active_route_lifetime_s: float = 10.0
    rreq_retries: int = 2
    discovery_timeout_s: float = 1.0
    buffer_cap: int = 64
    probe_depth_limit: int = 5
    session_timeout_s: float = 3.0
    seq_inflation: int = 100
    collusion: str = "group"
    # radio and kernel
    per_hop_latency_s: float = 0.001
    loss_probability: float = 0.0
    tick_interval_s: float = 0.1
    # hand-built topologies
    labels: tuple[str, ...] = ()
    positions: tuple[tuple[float, float], ...] = ()
    flow_list: tuple[FlowDef, ...] = ()
    dri_history: tuple[tuple[int, int, int, int], ...] = field(default=())

    @property
    def static(self) -> bool:
        return bool(self.positions) or self.speed_max_mps == 0

    def label(self, node: int) -> str:
        return self.labels[node] if self.labels else str(node)

    def node_labels(self) -> tuple[str, ...]:
        return self.labels if self.labels else tuple(str(i) for i in range(self.nodes))

    def protocol_config(self) -> ProtocolConfig:
        return ProtocolConfig(
            hello_interval=self.hello_interval_s,
            allowed_hello_loss=self.allowed_hello_loss,
            active_route_lifetime=self.active_route_lifetime_s,
            rreq_retries=self.rreq_retries,
            discovery_timeout=self.discovery_timeout_s,
            buffer_cap=self.buffer_cap,
            probe_depth_limit=self.probe_depth_limit,
            session_timeout=self.session_timeout_s,
            defense=self.mode == "defense",
            max_hops=self.nodes,
        )

    def with_overrides(self, **changes: Any) -> Scenario:
        """Copy with changed fields, re-validated.

        Lowering ``speed_max_mps`` below the current minimum drags the
        minimum down with it, so sweeps can reach the static point.
        """
        if "speed_max_mps" in changes and "speed_min_mps" not in changes:
            changes["speed_min_mps"] = min(self.speed_min_mps, float(changes["speed_max_mps"]))
        if changes.get("mode") in ("attack", "defense") and self.mode == "baseline":
            changes.setdefault("blackhole_count", Scenario.blackhole_count)
        return validate(dataclasses.replace(self, **changes))


FIELD_TYPES: dict[str, Any] = {f.name: f.type for f in dataclasses.fields(Scenario)}
SCALAR_FIELDS = tuple(
    f.name
    for f in dataclasses.fields(Scenario)
    if f.name not in ("labels", "positions", "flow_list", "dri_history", "blackhole_ids")
)


def validate(s: Scenario) -> Scenario:
    """Check invariants and normalise mode-dependent fields."""

    def need(cond: bool, what: str) -> None:
        if not cond:
            raise ValidationError(what)

    need(s.mode in MODES, f"mode must be one of {', '.join(MODES)}")
    need(s.collusion in COLLUSION, f"collusion must be one of {', '.join(COLLUSION)}")
    need(s.duration_s >= 0, "duration_s >= 0")
    need(s.warmup_s >= 0, "warmup_s >= 0")
    need(s.arena_m > 0, "arena_m > 0")
    need(s.range_m > 0, "range_m > 0")
    need(0 <= s.speed_min_mps <= s.speed_max_mps, "0 <= speed_min_mps <= speed_max_mps")
    need(s.speed_max_mps == 0 or s.speed_min_mps > 0, "speed_min_mps > 0 for mobile scenarios")
    need(s.pause_s >= 0, "pause_s >= 0")
    need(s.rate_pps > 0, "rate_pps > 0")
    need(1 <= s.payload_b <= 0xFFFF, "1 <= payload_b <= 65535")
    need(s.flows >= 0, "flows >= 0")
    need(s.flow_start_spread_s >= 0 and s.flow_duration_s >= 0, "flow timing fields >= 0")
    need(0 <= s.loss_probability <= 1, "0 <= loss_probability <= 1")
    need(s.per_hop_latency_s > 0, "per_hop_latency_s > 0")
    need(s.tick_interval_s > 0, "tick_interval_s > 0")
    need(s.hello_interval_s > 0 and s.allowed_hello_loss >= 1, "hello timers positive")
    need(s.active_route_lifetime_s > 0 and s.discovery_timeout_s > 0, "route timers positive")
    need(s.rreq_retries >= 0 and s.buffer_cap >= 1, "rreq_retries >= 0, buffer_cap >= 1")
    need(s.probe_depth_limit >= 1 and s.session_timeout_s > 0, "probe limits positive")
    need(s.seq_inflation >= 0, "seq_inflation >= 0")

    nodes = s.nodes
    if s.positions:
        nodes = len(s.positions)
        s = dataclasses.replace(s, nodes=nodes)
    need(2 <= nodes <= 0xFFFF, "2 <= nodes <= 65535")
    if s.labels:
        need(len(s.labels) == nodes, "one label per node")
        need(len(set(s.labels)) == nodes, "labels must be unique")

    if s.mode == "baseline":
        s = dataclasses.replace(s, blackhole_count=0, blackhole_ids=())
    if s.blackhole_ids:
        need(all(0 <= b < nodes for b in s.blackhole_ids), "blackhole_ids name existing nodes")
        need(len(set(s.blackhole_ids)) == len(s.blackhole_ids), "blackhole_ids are distinct")
        s = dataclasses.replace(s, blackhole_count=len(s.blackhole_ids))
    need(0 <= s.blackhole_count <= nodes - 2, "0 <= blackhole_count <= nodes - 2")

    for f in s.flow_list:
        need(0 <= f.src < nodes and 0 <= f.dst < nodes and f.src != f.dst, "flow endpoints valid and distinct")
        need(0 <= f.start <= f.stop, "flow start <= stop")
        need(f.src not in s.blackhole_ids and f.dst not in s.blackhole_ids, "flows run between honest nodes")
    if not s.flow_list:
        honest = nodes - s.blackhole_count
        need(s.flows <= honest * (honest - 1), "flows fit among honest node pairs")
    for node, peer, fb, tb in s.dri_history:
        need(0 <= node < nodes and 0 <= peer < nodes, "dri_history names existing nodes")
        need(fb in (0, 1) and tb in (0, 1), "dri_history bits are 0 or 1")
    return s


# -- file format ------------------------------------------------------------


def _resolve(token: str, labels: tuple[str, ...]) -> int:
    token = token.strip()
    if token in labels:
        return labels.index(token)
    return int(token)


def _parse_value(key: str, raw: str, labels: tuple[str, ...]) -> Any:
    kind = FIELD_TYPES[key]
    if key == "labels":
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    if key == "positions":
        out = []
        for item in raw.split(";"):
            if item.strip():
                x, y = item.replace(",", " ").split()
                out.append((float(x), float(y)))
        return tuple(out)
    if key == "blackhole_ids":
        return tuple(_resolve(p, labels) for p in raw.split(",") if p.strip())
    if key == "flow_list":
        flows = []
        for item in raw.split(";"):
            if item.strip():
                src, dst, start, stop = item.split()
                flows.append(FlowDef(_resolve(src, labels), _resolve(dst, labels), float(start), float(stop)))
        return tuple(flows)
    if key == "dri_history":
        hist = []
        for item in raw.split(";"):
            if item.strip():
                node, peer, bits = item.split()
                if len(bits) != 2 or set(bits) - {"0", "1"}:
                    raise ValueError(f"bad DRI bits {bits!r}")
                hist.append((_resolve(node, labels), _resolve(peer, labels), int(bits[0]), int(bits[1])))
        return tuple(hist)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def parse_scenario_text(text: str) -> Scenario:
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        key, value = (p.strip() for p in body.split("=", 1))
        if key not in FIELD_TYPES:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in raw:
            raise ParseError(lineno, f"duplicate key {key!r}")
        raw[key] = (lineno, value)

    labels: tuple[str, ...] = ()
    if "labels" in raw:
        labels = _parse_value("labels", raw["labels"][1], ())
    values: dict[str, Any] = {}
    for key, (lineno, value) in raw.items():
        try:
            values[key] = _parse_value(key, value, labels)
        except (ValueError, TypeError) as exc:
            raise ParseError(lineno, f"bad value for {key}: {exc}") from exc
    return validate(Scenario(**values))


def parse_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario_text(Path(path).read_text())


def _format_value(key: str, value: Any, labels: tuple[str, ...]) -> str:
    def name(n: int) -> str:
        return labels[n] if labels else str(n)

    if key == "labels":
        return ", ".join(value)
    if key == "positions":
        return "; ".join(f"{x!r} {y!r}" for x, y in value)
    if key == "blackhole_ids":
        return ", ".join(name(b) for b in value)
    if key == "flow_list":
        return "; ".join(f"{name(f.src)} {name(f.dst)} {f.start!r} {f.stop!r}" for f in value)
    if key == "dri_history":
        return "; ".join(f"{name(n)} {name(p)} {fb}{tb}" for n, p, fb, tb in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_scenario(s: Scenario, header: Optional[str] = None) -> str:
    """Render a scenario as a file that parses back to an equal value."""
    lines = [f"# {line}" for line in (header or "").splitlines()]
    for f in dataclasses.fields(Scenario):
        value = getattr(s, f.name)
        if value == () and f.name != "blackhole_ids":
            continue
        if f.name == "blackhole_ids" and not value:
            continue
        lines.append(f"{f.name} = {_format_value(f.name, value, s.labels)}")
    return "\n".join(lines) + "\n"


def csv_value(s: Scenario, key: str) -> str:
    value = getattr(s, key)
    if isinstance(value, tuple):
        return _format_value(key, value, s.labels)
    return str(value)
