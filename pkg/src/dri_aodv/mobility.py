"""Random-waypoint motion with a strictly positive minimum speed.

Traces are generated up front from a seeded generator and are immutable
afterwards, so the same motion can be replayed across protocol modes.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO, Union

import numpy as np

Position = tuple[float, float]


class InvalidParams(ValueError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Waypoint:
    start_pos: Position
    target_pos: Position
    speed: float
    depart_time: float
    pause_after: float

    @property
    def arrive_time(self) -> float:
        if self.speed == 0:
            return self.depart_time
        return self.depart_time + math.dist(self.start_pos, self.target_pos) / self.speed

    @property
    def end_time(self) -> float:
        return self.arrive_time + self.pause_after

    def position(self, t: float) -> Position:
        arrive = self.arrive_time
        if t >= arrive:
            return self.target_pos
        if t <= self.depart_time:
            return self.start_pos
        frac = (t - self.depart_time) / (arrive - self.depart_time)
        (x0, y0), (x1, y1) = self.start_pos, self.target_pos
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


@dataclass(frozen=True)
class MobilityTrace:
    legs: tuple[tuple[Waypoint, ...], ...]
    duration: float
    arena: float

    @property
    def node_count(self) -> int:
        return len(self.legs)

    def initial_positions(self) -> list[Position]:
        return [node_legs[0].start_pos for node_legs in self.legs]


def generate_trace(
    node_count: int,
    arena: float,
    v_min: float,
    v_max: float,
    pause: float,
    duration: float,
    rng: random.Random,
) -> MobilityTrace:
    if not (v_max >= v_min > 0):
        raise InvalidParams(f"need v_max >= v_min > 0, got v_min={v_min}, v_max={v_max}")
    if duration <= 0:
        raise InvalidParams(f"duration must be positive, got {duration}")
    if arena <= 0 or pause < 0 or node_count < 1:
        raise InvalidParams("arena must be positive, pause non-negative, at least one node")
    all_legs = []
    for _ in range(node_count):
        pos = (rng.uniform(0, arena), rng.uniform(0, arena))
        t = 0.0
        legs = []
        while t < duration:
            target = (rng.uniform(0, arena), rng.uniform(0, arena))
            speed = rng.uniform(v_min, v_max)
            leg = Waypoint(pos, target, speed, t, pause)
            legs.append(leg)
            t = leg.end_time
            pos = target
        all_legs.append(tuple(legs))
    return MobilityTrace(tuple(all_legs), float(duration), float(arena))


def static_trace(positions: Iterable[Position], duration: float, arena: float = 0.0) -> MobilityTrace:
    """Motionless nodes: one zero-length leg each, paused for the whole run."""
    legs = tuple((Waypoint(p, p, 0.0, 0.0, duration),) for p in positions)
    return MobilityTrace(legs, float(duration), float(arena))


def position_at(trace: MobilityTrace, node: int, t: float) -> Position:
    if not 0 <= t <= trace.duration:
        raise OutOfRange(f"t={t} outside [0, {trace.duration}]")
    legs = trace.legs[node]
    starts = [leg.depart_time for leg in legs]
    i = bisect.bisect_right(starts, t) - 1
    return legs[max(i, 0)].position(t)


def _breakpoints(legs: tuple[Waypoint, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ts, xs, ys = [], [], []
    for leg in legs:
        ts.append(leg.depart_time)
        xs.append(leg.start_pos[0])
        ys.append(leg.start_pos[1])
        ts.append(leg.arrive_time)
        xs.append(leg.target_pos[0])
        ys.append(leg.target_pos[1])
    return np.asarray(ts), np.asarray(xs), np.asarray(ys)


def positions_at_times(trace: MobilityTrace, times: np.ndarray) -> np.ndarray:
    """Positions of every node at each time: shape ``(len(times), nodes, 2)``."""
    out = np.empty((len(times), trace.node_count, 2))
    for node, legs in enumerate(trace.legs):
        ts, xs, ys = _breakpoints(legs)
        out[:, node, 0] = np.interp(times, ts, xs)
        out[:, node, 1] = np.interp(times, ts, ys)
    return out


# -- plain-text trace files: one waypoint per line, ``node time x y speed pause``


def export_trace(trace: MobilityTrace, out: Union[TextIO, Path, str]) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w") as fh:
            export_trace(trace, fh)
        return
    out.write(f"# duration {trace.duration!r} arena {trace.arena!r}\n")
    for node, legs in enumerate(trace.legs):
        for leg in legs:
            x, y = leg.start_pos
            out.write(f"{node} {leg.depart_time!r} {x!r} {y!r} {leg.speed!r} {leg.pause_after!r}\n")
    # final targets close each node's last leg
    for node, legs in enumerate(trace.legs):
        x, y = legs[-1].target_pos
        out.write(f"{node} end {x!r} {y!r}\n")


def import_trace(src: Union[TextIO, Path, str]) -> MobilityTrace:
    if isinstance(src, (str, Path)):
        with open(src) as fh:
            return import_trace(fh)
    header = src.readline().split()
    if len(header) != 5 or header[0] != "#":
        raise ValueError("missing trace header")
    duration, arena = float(header[2]), float(header[4])
    starts: dict[int, list[tuple[float, Position, float, float]]] = {}
    ends: dict[int, Position] = {}
    for lineno, line in enumerate(src, start=2):
        fields = line.split()
        if not fields:
            continue
        node = int(fields[0])
        if fields[1] == "end":
            ends[node] = (float(fields[2]), float(fields[3]))
            continue
        if len(fields) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields")
        t, x, y, speed, pause = map(float, fields[1:])
        starts.setdefault(node, []).append((t, (x, y), speed, pause))
    all_legs = []
    for node in range(len(starts)):
        rows = starts[node]
        legs = []
        for i, (t, pos, speed, pause) in enumerate(rows):
            target = rows[i + 1][1] if i + 1 < len(rows) else ends[node]
            legs.append(Waypoint(pos, target, speed, t, pause))
        all_legs.append(tuple(legs))
    return MobilityTrace(tuple(all_legs), duration, arena)
