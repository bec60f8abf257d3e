"""Hand-built static topologies used as oracles for the protocol logic."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import networkx as nx

from .scenario import FlowDef, Scenario, validate


class Unreachable(LookupError):
    pass


class TopologyMismatch(AssertionError):
    pass


@dataclass(frozen=True)
class StaticTopology:
    """Fixed positions whose unit-disk graph must equal ``edges`` exactly."""

    labels: tuple[str, ...]
    positions: tuple[tuple[float, float], ...]
    edges: frozenset[frozenset[str]]
    range_m: float = 200.0
    blackholes: tuple[str, ...] = ()
    flows: tuple[tuple[str, str, float, float], ...] = ()
    # (node, peer, "ft") DRI bits present before the run starts
    dri_history: tuple[tuple[str, str, str], ...] = ()
    duration_s: float = 30.0
    name: str = "static"

    def __post_init__(self) -> None:
        actual = self.geometric_edges()
        if actual != self.edges:
            missing = sorted(tuple(sorted(e)) for e in self.edges - actual)
            surplus = sorted(tuple(sorted(e)) for e in actual - self.edges)
            raise TopologyMismatch(f"{self.name}: missing {missing}, unexpected {surplus}")

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def geometric_edges(self) -> frozenset[frozenset[str]]:
        out = set()
        for (a, pa), (b, pb) in itertools.combinations(zip(self.labels, self.positions), 2):
            if math.dist(pa, pb) <= self.range_m:
                out.add(frozenset((a, b)))
        return frozenset(out)

    def graph(self, exclude: tuple[str, ...] = ()) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(label for label in self.labels if label not in exclude)
        g.add_edges_from(tuple(e) for e in self.edges if not (e & set(exclude)))
        return g

    def honest_graph(self) -> nx.Graph:
        return self.graph(exclude=self.blackholes)

    def scenario(self, mode: str = "defense", **overrides) -> Scenario:
        """The topology as a runnable scenario (black holes dropped in baseline)."""
        idx = self.index
        s = Scenario(
            duration_s=self.duration_s,
            nodes=len(self.labels),
            range_m=self.range_m,
            speed_min_mps=0.0,
            speed_max_mps=0.0,
            pause_s=0.0,
            flows=len(self.flows),
            warmup_s=0.0,
            flow_start_spread_s=0.0,
            mode=mode,
            blackhole_count=len(self.blackholes),
            blackhole_ids=tuple(idx(b) for b in self.blackholes) if mode != "baseline" else (),
            labels=self.labels,
            positions=self.positions,
            flow_list=tuple(FlowDef(idx(a), idx(b), start, stop) for a, b, start, stop in self.flows),
            dri_history=tuple(
                (idx(n), idx(p), int(bits[0]), int(bits[1])) for n, p, bits in self.dri_history
            ),
        )
        return validate(s).with_overrides(**overrides) if overrides else validate(s)


def _edges(*pairs: tuple[str, str]) -> frozenset[frozenset[str]]:
    return frozenset(frozenset(p) for p in pairs)


def fig6_topology() -> StaticTopology:
    """Two colluding black holes between S and D, with an honest detour.

    S reaches D honestly over S-2-4-6-D. B_1 sits next to S and vouches for
    B_2, which neighbors both 4 and 6 so either can be named as its next hop.
    S already trusts 2, 4 and 6 from earlier traffic; 4 and 6 never exchanged
    data with B_2.
    """
    coords = {
        "S": (330.0, 90.0),
        "1": (430.0, 0.0),
        "2": (380.0, 250.0),
        "4": (230.0, 310.0),
        "6": (130.0, 300.0),
        "B_1": (200.0, 70.0),
        "B_2": (110.0, 200.0),
        "D": (0.0, 200.0),
    }
    labels = tuple(coords)
    return StaticTopology(
        labels=labels,
        positions=tuple(coords[label] for label in labels),
        edges=_edges(
            ("S", "1"), ("S", "2"), ("S", "B_1"), ("2", "4"), ("4", "6"), ("4", "B_2"),
            ("6", "B_2"), ("B_1", "B_2"), ("B_2", "D"), ("6", "D"),
        ),
        blackholes=("B_1", "B_2"),
        flows=(("S", "D", 1.0, 29.0),),
        dri_history=(
            ("S", "2", "11"), ("S", "4", "01"), ("S", "6", "01"),
            ("2", "S", "11"), ("2", "4", "11"),
            ("4", "2", "11"), ("4", "6", "11"),
            ("6", "4", "11"),
        ),
        name="fig6",
    )


def line_topology(n: int = 5, spacing: float = 150.0) -> StaticTopology:
    labels = tuple(str(i) for i in range(n))
    return StaticTopology(
        labels=labels,
        positions=tuple((i * spacing, 0.0) for i in range(n)),
        edges=_edges(*((str(i), str(i + 1)) for i in range(n - 1))),
        flows=(("0", str(n - 1), 1.0, 20.0), (str(n - 1), "0", 2.0, 20.0)),
        name=f"line{n}",
    )


def grid_topology(rows: int = 3, cols: int = 4, spacing: float = 160.0) -> StaticTopology:
    """Lattice where only orthogonal neighbors hear each other (diagonal 226 m)."""
    labels, positions, pairs = [], [], []
    for r in range(rows):
        for c in range(cols):
            labels.append(f"{r}.{c}")
            positions.append((c * spacing, r * spacing))
            if c + 1 < cols:
                pairs.append((f"{r}.{c}", f"{r}.{c + 1}"))
            if r + 1 < rows:
                pairs.append((f"{r}.{c}", f"{r + 1}.{c}"))
    last = f"{rows - 1}.{cols - 1}"
    return StaticTopology(
        labels=tuple(labels),
        positions=tuple(positions),
        edges=_edges(*pairs),
        flows=(
            ("0.0", last, 1.0, 20.0),
            (f"0.{cols - 1}", f"{rows - 1}.0", 1.5, 20.0),
            (f"{rows - 1}.1", "0.2", 2.0, 20.0),
        ),
        name=f"grid{rows}x{cols}",
    )


def honest_fixtures() -> list[StaticTopology]:
    """Adversary-free static topologies (fig6 is run with its black holes honest)."""
    return [fig6_topology(), line_topology(), grid_topology()]


def oracle_route(
    topology: StaticTopology, src: str, dst: str, exclude: tuple[str, ...] = ()
) -> tuple[int, frozenset[tuple[str, ...]]]:
    """Shortest hop count and every minimal path, by breadth-first search."""
    g = topology.graph(exclude)
    if src == dst:
        return 0, frozenset({(src,)})
    try:
        paths = frozenset(tuple(p) for p in nx.all_shortest_paths(g, src, dst))
    except (nx.NetworkXNoPath, nx.NodeNotFound) as exc:
        raise Unreachable(f"{dst} unreachable from {src}") from exc
    return len(next(iter(paths))) - 1, paths


def table_ii_scenario(mode: str = "attack") -> Scenario:
    return validate(Scenario(mode=mode))
