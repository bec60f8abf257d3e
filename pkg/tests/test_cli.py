import csv

import pytest

from dri_aodv import cli
from dri_aodv.fixtures import fig6_topology
from dri_aodv.scenario import (
    FlowDef,
    ParseError,
    Scenario,
    ValidationError,
    format_scenario,
    parse_scenario,
    parse_scenario_text,
    validate,
)

SMALL = """\
# small mobile network
nodes = 12
arena_m = 500
duration_s = 60
warmup_s = 10
flows = 3
mode = attack
blackhole_count = 1
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.scenario"
    path.write_text(SMALL)
    return path


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- scenario files ---------------------------------------------------------


def test_empty_file_gives_default_baseline():
    s = parse_scenario_text("")
    assert s == Scenario(blackhole_count=0)
    assert (s.nodes, s.arena_m, s.range_m, s.flows, s.rate_pps) == (30, 1000.0, 200.0, 15, 2.0)


def test_zero_max_speed_with_positive_min_rejected():
    with pytest.raises(ValidationError):
        parse_scenario_text("speed_max_mps = 0\nspeed_min_mps = 1\n")
    assert parse_scenario_text("speed_max_mps = 0\nspeed_min_mps = 0\n").static


def test_six_blackholes_in_defense_is_valid():
    s = parse_scenario_text("mode = defense\nblackhole_count = 6\n")
    assert s.blackhole_count == 6 and s.mode == "defense"


def test_unknown_key_reports_its_line():
    with pytest.raises(ParseError) as info:
        parse_scenario_text("nodes = 10\n\n# comment\nwarp_factor = 9\n")
    assert info.value.lineno == 4 and "warp_factor" in str(info.value)


@pytest.mark.parametrize(
    "text,line",
    [("nodes = ten\n", 1), ("nodes = 5\nnodes = 6\n", 2), ("mode = attack\njust words\n", 2)],
)
def test_malformed_lines(text, line):
    with pytest.raises(ParseError) as info:
        parse_scenario_text(text)
    assert info.value.lineno == line


def test_format_parse_round_trip():
    for s in (
        Scenario(),
        Scenario(mode="defense", blackhole_count=6, speed_max_mps=20.0, loss_probability=0.05),
        fig6_topology().scenario("defense"),
    ):
        s = validate(s)
        assert parse_scenario_text(format_scenario(s, "header line")) == s


def test_labels_resolve_in_tuple_fields():
    s = parse_scenario_text(
        "labels = A, B, C\npositions = 0 0; 100 0; 200 0\nflow_list = A C 1 5\n"
    )
    assert s.flow_list == (FlowDef(0, 2, 1.0, 5.0),)


# -- commands ---------------------------------------------------------------


def test_run_writes_runs_then_summary(small, tmp_path, capsys):
    out = tmp_path / "out.csv"
    assert cli.main(["run", str(small), "--seeds", "1-5", "--out", str(out)]) == 0
    rows = read(out)
    assert [r["seed"] for r in rows] == ["1", "2", "3", "4", "5", "mean", "min", "max", "stddev"]
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    assert all(r["mode"] == "attack" for r in rows)
    assert "pdr" in capsys.readouterr().out


def test_rerun_is_byte_identical(small, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["run", str(small), "--seeds", "1-3", "--out", str(a)])
    cli.main(["run", str(small), "--seeds", "1-3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_parallel_jobs_match_serial(small, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["run", str(small), "--seeds", "1-3", "--out", str(a), "--jobs", "1"])
    cli.main(["run", str(small), "--seeds", "1-3", "--out", str(b), "--jobs", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_fig6_run_flags_both_colluders(tmp_path):
    scen = tmp_path / "fig6.scenario"
    scen.write_text(format_scenario(fig6_topology().scenario("defense")))
    out = tmp_path / "fig6.csv"
    assert cli.main(["run", str(scen), "--seeds", "1-3", "--out", str(out)]) == 0
    mean = read(out)[3]
    assert mean["seed"] == "mean"
    assert mean["flagged"] == "B_1;B_2"
    assert float(mean["false_positive_rate"]) == 0.0 and float(mean["pdr"]) == 1.0


def test_sweep_row_count_and_order(small, tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["sweep", str(small), "--key", "speed_max_mps", "--values", "0,5,10",
            "--modes", "baseline,defense", "--seeds", "1-2", "--out", str(out)]
    assert cli.main(args) == 0
    rows = read(out)
    assert len(rows) == 3 * 2 * (2 + 4)
    assert [r["speed_max_mps"] for r in rows[::6]] == ["0.0", "0.0", "5.0", "5.0", "10.0", "10.0"]
    assert [r["mode"] for r in rows[::6]] == ["baseline", "defense"] * 3


def test_verbose_events_writes_logs(small, tmp_path):
    out = tmp_path / "v.csv"
    cli.main(["run", str(small), "--seeds", "2", "--out", str(out), "--verbose-events"])
    (log,) = tmp_path.glob("*.events")
    first = log.read_text().splitlines()[0].split()
    assert first[1] in ("tx", "rx")


def test_bad_scenario_exits_nonzero_without_output(tmp_path, capsys):
    bad = tmp_path / "bad.scenario"
    bad.write_text("nodes = 3\nbogus = 1\n")
    out = tmp_path / "never.csv"
    assert cli.main(["run", str(bad), "--out", str(out)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert not out.exists() and not (tmp_path / "never.csv.partial").exists()


def test_failed_write_leaves_no_partial_file(tmp_path):
    out = tmp_path / "x.csv"
    with pytest.raises(ValueError):
        cli.write_csv([{"not_a_column": 1}], str(out))
    assert list(tmp_path.iterdir()) == []


def test_sweep_rejects_unknown_key(small):
    assert cli.main(["sweep", str(small), "--key", "warp", "--values", "1"]) == 1


@pytest.mark.parametrize(
    "text,seeds", [("1-5", [1, 2, 3, 4, 5]), ("1,4,9", [1, 4, 9]), ("1-3,10", [1, 2, 3, 10])]
)
def test_seed_lists(text, seeds):
    assert cli.parse_seeds(text) == seeds


@pytest.mark.parametrize("text", ["", "5-1", "1,1"])
def test_bad_seed_lists(text):
    with pytest.raises(Exception):
        cli.parse_seeds(text)


def test_fixtures_command_writes_parseable_files(tmp_path):
    assert cli.main(["fixtures", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig6.scenario", "grid3x4.scenario", "line5.scenario", "table2.scenario"]
    assert parse_scenario(tmp_path / "fig6.scenario") == fig6_topology().scenario("defense")
