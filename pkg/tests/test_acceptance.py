"""Acceptance criteria at full scale: 30 nodes, 1000 s, five seeds per point.

Every simulated cell is cached for the session, so overlapping sweeps run
once. Each test records a one-line verdict that conftest prints at the end.
"""

import statistics
import subprocess
import sys
import time
from pathlib import Path

from dri_aodv.fixtures import fig6_topology
from dri_aodv.scenario import Scenario
from dri_aodv.simkernel import run

SEEDS = (1, 2, 3, 4, 5)
SPEEDS = (0.0, 5.0, 10.0, 15.0, 20.0)
BLACKHOLE_COUNTS = (0, 2, 3, 5, 6)
FLOW_DURATIONS = (100.0, 200.0, 400.0, 800.0)
TESTS = Path(__file__).parent

RESULTS: dict[int, tuple[bool, str]] = {}
_cache: dict = {}


def cell(mode, seed, **overrides):
    key = (mode, seed, tuple(sorted(overrides.items())))
    if key not in _cache:
        scenario = Scenario(mode=mode).with_overrides(**overrides)
        started = time.perf_counter()
        report = run(scenario, seed)
        _cache[key] = (report, time.perf_counter() - started)
    return _cache[key][0]


def point(mode, **overrides):
    return [cell(mode, s, **overrides) for s in SEEDS]


def mean(reports, attr):
    return statistics.fmean(getattr(r, attr) for r in reports)


def sd(reports, attr):
    return statistics.pstdev(getattr(r, attr) for r in reports)


def verdict(n, ok, detail):
    RESULTS[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def test_criterion_1_colluding_pair_oracle():
    fails = []
    slowest = 0.0
    for seed in range(1, 21):
        started = time.perf_counter()
        r = run(fig6_topology().scenario("defense"), seed)
        slowest = max(slowest, time.perf_counter() - started)
        c = r.counters
        got = (r.roster.render(c.flagged), r.false_positive_rate, r.false_negative_rate,
               c.sessions_opened, c.verdicts["verdict_blackholes"])
        if got != ("B_1;B_2", 0.0, 0.0, 1, 1):
            fails.append((seed, got))
    verdict(1, not fails and slowest < 1.0,
            f"20 seeds flag exactly B_1;B_2 with one session, slowest run {slowest:.3f}s, failures {fails}")


def test_criterion_2_attack_halves_delivery():
    base, attack = point("baseline"), point("attack")
    slowest = max(_cache[("attack", s, ())][1] for s in SEEDS)
    b, a = mean(base, "pdr"), mean(attack, "pdr")
    verdict(2, a < 0.5 * b and slowest < 60.0,
            f"pdr attack {a:.3f} vs baseline {b:.3f} (need < {0.5 * b:.3f}), slowest run {slowest:.1f}s")


def test_criterion_3_defense_improves_every_mobility_point():
    gaps = {}
    for v in SPEEDS[1:]:
        gaps[v] = mean(point("defense", speed_max_mps=v), "pdr") - mean(point("attack", speed_max_mps=v), "pdr")
    shown = ", ".join(f"v{v:g}: {g:+.3f}" for v, g in gaps.items())
    verdict(3, all(g >= 0.10 for g in gaps.values()), f"defense - attack pdr {shown} (need >= 0.10)")


def test_matched_pairs_defense_at_least_attack():
    # one exception per five seeds is tolerated: motion can keep attackers off every flow path
    exceptions = {}
    for v in SPEEDS[1:]:
        bad = [
            s for s in SEEDS
            if cell("attack", s, speed_max_mps=v).counters.attacking_blackholes
            and cell("defense", s, speed_max_mps=v).pdr < cell("attack", s, speed_max_mps=v).pdr
        ]
        exceptions[v] = bad
    assert all(len(b) <= 1 for b in exceptions.values()), exceptions


def test_criterion_4_mobility_trends():
    base = [point("baseline", speed_max_mps=v) for v in SPEEDS]
    attack = [point("attack", speed_max_mps=v) for v in SPEEDS]
    pdr = [(mean(p, "pdr"), sd(p, "pdr")) for p in base]
    # a rise counts as noise while the two points' one-sigma bars still overlap
    pdr_ok = all(m2 - m1 <= s1 + s2 for (m1, s1), (m2, s2) in zip(pdr, pdr[1:]))
    forged = [mean(p, "false_rrep_count") for p in attack]
    forged_ok = all(b >= a for a, b in zip(forged, forged[1:]))
    shown = " ".join(f"{m:.3f}±{s:.3f}" for m, s in pdr)
    verdict(4, pdr_ok and forged_ok,
            f"baseline pdr {shown}; false rreps {' '.join(f'{f:.0f}' for f in forged)}")


def test_criterion_5_detection_quality():
    worst_fp = worst_fn = 0.0
    static_ok = True
    lines = []
    for n in BLACKHOLE_COUNTS:
        fps, fns = [], []
        for v in SPEEDS:
            p = point("defense", blackhole_count=n, speed_max_mps=v)
            fps.append(mean(p, "false_positive_rate"))
            fns.append(mean(p, "false_negative_rate"))
        worst_fp, worst_fn = max(worst_fp, *fps), max(worst_fn, *fns)
        slack = 1.0 / n if n else 0.0
        static_ok &= fns[0] >= max(fns) - slack - 1e-12
        lines.append(f"n{n} fn[{' '.join(f'{x:.2f}' for x in fns)}] fp[{' '.join(f'{x:.2f}' for x in fps)}]")
    verdict(5, worst_fp <= 0.10 and worst_fn <= 0.15 and static_ok,
            f"max fp {worst_fp:.3f} (<= 0.10), max fn {worst_fn:.3f} (<= 0.15), "
            f"static is the fn maximum: {static_ok}; " + "; ".join(lines))


def test_criterion_6_heavy_attack():
    dfn, att = point("defense", blackhole_count=6), point("attack", blackhole_count=6)
    d, a = mean(dfn, "pdr"), mean(att, "pdr")
    verdict(6, d >= 0.80 and d > a, f"6 black holes: defense pdr {d:.3f} (need >= 0.80), attack {a:.3f}")


def test_criterion_7_overhead_falls_with_traffic():
    pts = [point("defense", blackhole_count=6, flow_duration_s=d) for d in FLOW_DURATIONS]
    generated = [statistics.fmean(r.counters.data_generated for r in p) for p in pts]
    overhead = [mean(p, "control_overhead_pct") for p in pts]
    ok = all(g2 > g1 for g1, g2 in zip(generated, generated[1:]))
    ok &= all(o2 <= o1 for o1, o2 in zip(overhead, overhead[1:]))
    shown = ", ".join(f"{g:.0f} pkts: {o:.0f}%" for g, o in zip(generated, overhead))
    verdict(7, ok, f"overhead by generated data {shown}")


PROPERTY_SUITES = [
    "test_messages.py",
    "test_properties.py",
    "test_simkernel.py::test_conservation_ledger_exact",
    "test_cli.py::test_rerun_is_byte_identical",
    "test_defense.py::test_judge_truth_table",
    "test_defense.py::test_reliable_responder_short_circuits",
    "test_defense.py::test_colluder_chain_stops_at_depth_limit_without_flagging",
]


def test_criterion_8_property_suites():
    args = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"]
    args += [str(TESTS / target) for target in PROPERTY_SUITES]
    proc = subprocess.run(args, capture_output=True, text=True, cwd=TESTS.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    verdict(8, proc.returncode == 0, f"property suites: {tail}")
