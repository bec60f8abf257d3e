import statistics
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dri_aodv.metrics import (
    CONTROL_KINDS,
    Counters,
    MixedScenarios,
    NodeRoster,
    aggregate,
    finalize,
    summary_rows,
)
from dri_aodv.scenario import Scenario


def roster(n=30, blackholes=()):
    return NodeRoster(tuple(str(i) for i in range(n)), frozenset(blackholes))


def report(delivered=50, generated=100, seed=1, scenario=None, **kw):
    c = Counters(data_generated=generated, data_delivered=delivered, **kw)
    return finalize(c, roster(), scenario, seed)


def test_perfect_run():
    r = finalize(Counters(data_generated=100, data_delivered=100), roster())
    assert (r.pdr, r.false_positive_rate, r.false_negative_rate) == (1.0, 0.0, 0.0)


def test_partial_delivery_ratio():
    assert finalize(Counters(data_generated=1000, data_delivered=380), roster()).pdr == 0.38


def test_fp_and_fn_from_membership():
    c = Counters(attacking_blackholes={28, 29}, flagged={28, 3})
    r = finalize(c, roster(blackholes=(28, 29)))
    assert r.false_negative_rate == 0.5
    assert r.false_positive_rate == pytest.approx(1 / 28)
    assert r.false_positive_rate == pytest.approx(0.0357, abs=1e-4)


def test_dormant_blackhole_not_counted_as_missed():
    c = Counters(attacking_blackholes=set(), flagged=set())
    assert finalize(c, roster(blackholes=(28, 29))).false_negative_rate == 0.0


def test_nothing_generated_gives_zero_pdr():
    assert finalize(Counters(), roster()).pdr == 0.0


def test_overhead_excludes_hello_and_guards_zero_delivery():
    tx = Counter({"RREQ": 30, "RREP": 10, "HELLO": 1000})
    r = finalize(Counters(data_generated=10, data_delivered=0, control_tx=tx), roster())
    assert r.control_overhead_pct == 100.0 * 40
    assert r.control_overhead_incl_hello_pct == 100.0 * 1040
    assert set(CONTROL_KINDS).isdisjoint({"HELLO", "DATA"})


def test_row_renders_sets_in_label_order():
    labels = ("S", "1", "B_1", "B_2", "D")
    c = Counters(flagged={3, 2}, attacking_blackholes={2})
    r = finalize(c, NodeRoster(labels, frozenset({2, 3})))
    row = r.as_row()
    assert row["flagged"] == "B_1;B_2" and row["attacking_blackholes"] == "B_1"


def test_five_identical_runs_have_zero_spread():
    s = aggregate([report(seed=i) for i in range(1, 6)])
    assert s.count == 5
    assert s["pdr"].mean == s["pdr"].min == s["pdr"].max == 0.5
    assert s["pdr"].stddev == 0.0


def test_single_run_summary_is_the_run():
    r = report(delivered=37)
    s = aggregate([r])
    assert s["pdr"].mean == r.pdr and s["pdr"].stddev == 0.0


def test_population_stddev():
    s = aggregate([report(delivered=d, seed=i) for i, d in enumerate((20, 40, 60))])
    assert s["pdr"].stddev == pytest.approx(statistics.pstdev([0.2, 0.4, 0.6]))
    assert (s["pdr"].min, s["pdr"].max) == (0.2, 0.6)


def test_aggregate_is_order_independent():
    reps = [report(delivered=d, seed=i) for i, d in enumerate((11, 73, 29, 5))]
    assert aggregate(reps) == aggregate(reps[::-1])


def test_mixed_scenarios_rejected():
    a, b = Scenario(), Scenario(nodes=20)
    with pytest.raises(MixedScenarios):
        aggregate([report(scenario=a), report(scenario=b, seed=2)])
    # differing only by seed is fine
    aggregate([report(scenario=a), report(scenario=Scenario(seed=9), seed=2)])


def test_empty_aggregate_rejected():
    with pytest.raises(ValueError):
        aggregate([])


def test_summary_rows_are_labelled_and_carry_set_unions():
    reps = [
        finalize(Counters(data_generated=10, data_delivered=5, flagged={1}), roster(), seed=1),
        finalize(Counters(data_generated=10, data_delivered=9, flagged={4}), roster(), seed=2),
    ]
    rows = summary_rows(aggregate(reps))
    assert [label for label, _ in rows] == ["mean", "min", "max", "stddev"]
    assert all(row["flagged"] == "1;4" for _, row in rows)
    assert rows[0][1]["pdr"] == pytest.approx(0.7)


@settings(max_examples=60)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=8))
def test_mean_lies_between_extremes(delivered):
    s = aggregate([report(delivered=d, seed=i) for i, d in enumerate(delivered)])
    assert s["pdr"].min - 1e-12 <= s["pdr"].mean <= s["pdr"].max + 1e-12
    assert s["pdr"].stddev >= 0
