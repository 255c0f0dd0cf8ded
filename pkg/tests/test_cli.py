import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from blockwatt import cli
from blockwatt.units import DATA_DIR

MARKET = str(DATA_DIR / "market_sample.csv")
SCENARIOS = DATA_DIR / "scenarios"
GOLDEN = Path(__file__).parent / "golden"
SUBCOMMANDS = ["bounds", "margin", "project", "simulate", "rollup", "compare", "correlate"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_project_examples():
    code, out, _ = run("project", "--current-twh", 100, "--fee-share", 0.2, "--halvings", 3)
    assert code == 0
    table = rows(out)
    assert [float(r["twh_per_year"]) for r in table] == pytest.approx([100, 60, 40, 30, 20], abs=1e-9)
    assert table[-1]["halvings"] == "inf"


def test_project_edge_cases():
    _, out, _ = run("project", "--current-twh", 80, "--fee-share", 0.3, "--halvings", 0)
    assert float(rows(out)[0]["twh_per_year"]) == 80
    _, out, _ = run("project", "--current-twh", 80, "--fee-share", 1, "--halvings", 4)
    assert {float(r["twh_per_year"]) for r in rows(out)} == {80.0}
    assert run("project", "--current-twh", 80, "--fee-share", 1.5)[0] == 1


def test_rollup_defaults():
    code, out, _ = run("rollup")
    (row,) = rows(out)
    assert code == 0
    assert float(row["before_j_per_tx"]) == pytest.approx(100)
    assert float(row["after_j_per_tx"]) == pytest.approx(1.5)
    assert float(row["saving"]) == pytest.approx(0.985)
    assert "saving_idle" not in row


def test_rollup_small_network_and_idle():
    code, out, err = run("rollup", "--nodes", 1, "--idle-w", 2)
    (row,) = rows(out)
    assert code == 0 and float(row["saving"]) < 0
    assert "saving_idle" in row and "increases" in err


def test_compare_bundled_and_single(tmp_path):
    code, out, _ = run("compare")
    names = [r["name"] for r in rows(out)]
    assert code == 0
    assert names == ["PoW Bitcoin", "large non-PoW network", "large network + zk-rollup", "10-node permissioned", "central key-value store"]
    one = tmp_path / "one.csv"
    one.write_text("name,node_count,energy_per_tx_per_node_j,throughput_tps\nsolo,1,0.02,5000\n", encoding="utf-8")
    assert len(rows(run("compare", one)[1])) == 1


def test_compare_missing_file_exit_2(tmp_path):
    code, out, err = run("compare", tmp_path / "missing.csv")
    assert code == 2 and out == "" and "missing.csv" in err


def test_bounds_sample_row():
    code, out, _ = run("bounds", MARKET, "--tariff", 0.05, "--tariff", 0.025, "--date-range", "2020-01-01:2020-01-01")
    (row,) = rows(out)
    assert code == 0
    assert float(row["lower_twh"]) == pytest.approx(60, rel=0.25)
    assert float(row["upper_twh_0.025"]) == pytest.approx(2 * float(row["upper_twh_0.05"]))
    assert row["lower_hardware"] == "WhatsminerM10S"


def test_bounds_numeric_and_named_efficiency():
    _, out, _ = run("bounds", MARKET, "--efficiency", "3e-11", "--date-range", "2020-01-01:2020-01-01")
    assert float(rows(out)[0]["lower_twh"]) == pytest.approx(26.3, abs=0.1)
    _, out, _ = run("bounds", MARKET, "--efficiency", "AntminerS9", "--date-range", "2020-01-01:2020-01-01")
    assert rows(out)[0]["lower_hardware"] == "AntminerS9"
    assert run("bounds", MARKET, "--efficiency", "S21")[0] == 1


def test_bounds_empty_range_header_only():
    code, out, err = run("bounds", MARKET, "--date-range", "2030-01-01:2030-12-31")
    assert code == 0 and out.count("\n") == 1 and out.startswith("date,")
    assert "no samples" in err


def test_bounds_zero_tariff_exit_1():
    code, out, err = run("bounds", MARKET, "--tariff", 0)
    assert code == 1 and out == "" and "tariff" in err


def test_bounds_schema_violation_exit_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,price_usd,difficulty,subsidy\n2020-01-01,x,1,1\n", encoding="utf-8")
    code, _, err = run("bounds", bad)
    assert code == 1 and ":2:" in err


def test_margin_crossover_at_halving():
    code, out, _ = run("margin", MARKET, "--tariff", 0.05, "--hardware", "AntminerS9", "AntminerS19Pro",
                       "--date-range", "2020-05-08:2020-05-14")
    assert code == 0
    table = rows(out)
    s9 = [float(r["margin_AntminerS9_0.05"]) for r in table]
    s19 = [float(r["margin_AntminerS19Pro_0.05"]) for r in table]
    flip = next(i for i, m in enumerate(s9) if m < 0)
    assert table[flip]["date"] == "2020-05-12"
    assert all(m > 0 for m in s9[:flip]) and all(m < 0 for m in s9[flip:])
    assert all(m > 0 for m in s19)


def test_margin_single_row_and_unknown_name():
    _, out, _ = run("margin", MARKET, "--hardware", "AntminerS9", "--date-range", "2020-05-12:2020-05-12")
    assert len(rows(out)) == 1 and len(rows(out)[0]) == 3
    code, _, err = run("margin", MARKET, "--hardware", "AntminerS21")
    assert code == 1 and "AntminerS21" in err


def test_correlate_identity_and_zero_variance(tmp_path):
    code, out, _ = run("correlate", MARKET, "--x", "price_usd", "--y", "price_usd")
    assert code == 0 and float(rows(out)[0]["pearson_r"]) == pytest.approx(1.0)
    flat = tmp_path / "flat.csv"
    flat.write_text("date,price_usd,difficulty,subsidy\n2020-01-01,5,1,1\n2020-01-03,5,2,1\n", encoding="utf-8")
    code, out, err = run("correlate", flat, "--x", "price_usd", "--y", "difficulty")
    assert code == 1 and out == "" and "zero-variance" in err


def test_correlate_runs_on_sample():
    code, out, _ = run("correlate", MARKET, "--date-range", "2019-07-01:2020-07-01")
    r = float(rows(out)[0]["pearson_r"])
    assert code == 0 and -1 <= r <= 1
    assert int(rows(out)[0]["n"]) == 367  # daily after forward fill


@pytest.mark.parametrize("name", ["constant_price", "halving_ladder", "price_drop"])
def test_simulate_matches_golden_trace(name, tmp_path):
    out_path = tmp_path / "trace.csv"
    code, out, err = run("simulate", SCENARIOS / f"{name}.txt", "--out", out_path)
    assert code == 0 and out == ""
    assert out_path.read_bytes() == (GOLDEN / f"{name}.csv").read_bytes()
    assert "outcome: completed" in err and "mean power" in err


def test_simulate_stdout_and_several_files(tmp_path):
    code, out, _ = run("simulate", SCENARIOS / "constant_price.txt")
    assert code == 0 and out == (GOLDEN / "constant_price.csv").read_text(encoding="utf-8")
    code, _, err = run("simulate", SCENARIOS / "constant_price.txt", SCENARIOS / "price_drop.txt", "--out", tmp_path)
    assert code == 0
    for name in ("constant_price", "price_drop"):
        assert (tmp_path / f"{name}.csv").read_bytes() == (GOLDEN / f"{name}.csv").read_bytes()
    assert run("simulate", SCENARIOS / "constant_price.txt", SCENARIOS / "price_drop.txt")[0] == 1


def test_simulate_bad_scenario_names_key(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("chain.blok_time = 600\n", encoding="utf-8")
    code, _, err = run("simulate", bad)
    assert code == 1 and "chain.blok_time" in err
    assert run("simulate", tmp_path / "none.txt")[0] == 2


def test_deterministic_stdout():
    args = ("bounds", MARKET, "--tariff", 0.05)
    assert run(*args)[1] == run(*args)[1]


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_unknown_flag_exit_1(sub):
    code, out, err = run(sub, "--no-such-flag")
    assert code == 1 and out == "" and err


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_lists_flags(sub):
    action = next(a for a in cli.build_parser()._subparsers._group_actions if a.choices)
    parser = action.choices[sub]
    text = parser.format_help()
    for opt in parser._actions:
        for flag in opt.option_strings:
            assert flag in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "blockwatt", "rollup"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("nodes,")
    proc = subprocess.run([sys.executable, "-m", "blockwatt", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 1
