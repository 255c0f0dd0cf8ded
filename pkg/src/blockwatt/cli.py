"""Command-line entry point: ``blockwatt <subcommand> ...``.

Every subcommand writes CSV to stdout and diagnostics to stderr. Exit codes:
0 success, 1 invalid input or usage, 2 file I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence, TextIO

from blockwatt import estimators as est
from blockwatt import ingest, minesim, netenergy
from blockwatt.ingest import format_number
from blockwatt.units import (
    BITCOIN,
    DATA_DIR,
    HASHES_PER_EH,
    HardwareProfile,
    Tariff,
    joules_to_kwh,
    load_catalog,
    watts_to_twh_per_year,
)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is reserved for I/O
        raise UsageError(f"{self.prog}: {message}")


def _date_range(text: str) -> tuple[dt.date | None, dt.date | None]:
    start, sep, end = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("expected START:END (either side may be empty)")
    try:
        lo = ingest.parse_date(start) if start.strip() else None
        hi = ingest.parse_date(end) if end.strip() else None
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return lo, hi


def _positive_tariff(text: str) -> float:
    try:
        v = ingest.parse_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"tariff must be > 0 USD/kWh, got {text}")
    return v


def _number(text: str) -> float:
    try:
        return ingest.parse_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _writer(out: TextIO):
    return csv.writer(out, lineterminator="\n")


def _tariff_label(t: float) -> str:
    return format_number(t)


def _load_catalog(path: str | None) -> list[HardwareProfile]:
    return load_catalog(path) if path else load_catalog()


def _select_market(path: str, date_range) -> est.MarketSeries:
    series = ingest.load_market_csv(path)
    if date_range:
        series = series.between(*date_range)
    return series


def best_hardware(catalog: Sequence[HardwareProfile], year: int) -> HardwareProfile:
    """Most efficient device launched before ``year``.

    A device counts as on the market from the year after its launch year.
    """
    candidates = [hw for hw in catalog if hw.launch_year < year]
    if not candidates:
        raise ValueError(f"no catalog hardware launched before {year}")
    return min(candidates, key=lambda hw: (hw.efficiency, hw.name))


def _efficiency_for(spec_text: str, catalog, day: dt.date) -> tuple[str, float]:
    if spec_text == "best":
        hw = best_hardware(catalog, day.year)
        return hw.name, hw.efficiency
    for hw in catalog:
        if hw.name == spec_text:
            return hw.name, hw.efficiency
    try:
        value = ingest.parse_number(spec_text)
    except ValueError:
        raise ValueError(f"unknown hardware {spec_text!r}") from None
    if not value > 0:
        raise ValueError("efficiency must be > 0 J/H")
    return "", value


# --- subcommands ----------------------------------------------------------


def cmd_bounds(args, out: TextIO, err: TextIO) -> int:
    series = _select_market(args.market, args.date_range)
    catalog = _load_catalog(args.hardware)
    tariffs = [Tariff(t) for t in (args.tariff or [0.05])]
    w = _writer(out)
    w.writerow(["date", "hash_rate_ehs", "lower_hardware", "efficiency_j_per_h", "lower_twh"]
               + [f"upper_twh_{_tariff_label(t.usd_per_kwh)}" for t in tariffs])
    for s in series:
        hash_rate = est.network_hash_rate(s.difficulty, args.block_time, BITCOIN)
        hw_name, eff = _efficiency_for(args.efficiency, catalog, s.date)
        lower = est.lower_bound_power(hash_rate, eff)
        uppers = [est.upper_bound_power(s, BITCOIN, t) for t in tariffs]
        w.writerow(
            [s.date.isoformat(), format_number(hash_rate / HASHES_PER_EH), hw_name, format_number(eff),
             format_number(lower.annual_energy)]
            + [format_number(u.annual_energy) for u in uppers]
        )
    if len(series) == 0:
        print("no samples in the selected date range", file=err)
    return EXIT_OK


def cmd_margin(args, out: TextIO, err: TextIO) -> int:
    series = _select_market(args.market, args.date_range)
    catalog = _load_catalog(args.hardware_csv)
    by_name = {hw.name: hw for hw in catalog}
    names = args.hardware or [hw.name for hw in catalog]
    for n in names:
        if n not in by_name:
            raise ValueError(f"unknown hardware {n!r} (catalog: {', '.join(by_name)})")
    tariffs = [Tariff(t) for t in (args.tariff or [0.05])]
    w = _writer(out)
    cols = [f"margin_{n}_{_tariff_label(t.usd_per_kwh)}" for n in names for t in tariffs]
    w.writerow(["date", "revenue_usd_per_eh"] + cols)
    for s in series:
        r = est.revenue_per_exahash(s, BITCOIN)
        w.writerow(
            [s.date.isoformat(), format_number(r)]
            + [format_number(est.relative_margin(by_name[n], t, r)) for n in names for t in tariffs]
        )
    return EXIT_OK


def cmd_project(args, out: TextIO, err: TextIO) -> int:
    if args.current_twh < 0:
        raise ValueError("--current-twh must be >= 0")
    if not 0 <= args.fee_share <= 1:
        raise ValueError("--fee-share must be in [0, 1]")
    if args.halvings < 0:
        raise ValueError("--halvings must be >= 0")
    w = _writer(out)
    w.writerow(["halvings", "years", "fraction", "twh_per_year"])
    for n in range(args.halvings + 1):
        f = est.halving_fraction(args.fee_share, n)
        w.writerow([n, 4 * n, format_number(f), format_number(args.current_twh * f)])
    floor = est.halving_fraction(args.fee_share, math.inf)
    w.writerow(["inf", "inf", format_number(floor), format_number(args.current_twh * floor)])
    return EXIT_OK


TRACE_FIXED_COLUMNS = [
    "epoch_index",
    "sim_time_s",
    "height",
    "difficulty",
    "hash_rate_hs",
    "power_w",
    "subsidy",
    "revenue_usd_per_eh",
    "block_time_s",
]


def render_trace(trace: minesim.SimTrace, cohort_ids: Sequence[str]) -> str:
    import io

    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(TRACE_FIXED_COLUMNS + [f"margin_{c}" for c in cohort_ids] + [f"active_{c}" for c in cohort_ids])
    for r in trace.records:
        w.writerow(
            [r.epoch_index, format_number(r.sim_time), r.height, format_number(r.difficulty),
             format_number(r.hash_rate), format_number(r.power), format_number(r.subsidy),
             format_number(r.revenue_per_eh), format_number(r.block_time)]
            + [format_number(r.per_cohort_margin[c]) for c in cohort_ids]
            + [format_number(r.active_share[c]) for c in cohort_ids]
        )
    return buf.getvalue()


def summary_text(name: str, trace: minesim.SimTrace) -> str:
    lines = [f"[{name}] outcome: {trace.outcome}" + (f" ({trace.detail})" if trace.detail else "")]
    if trace.records:
        s = minesim.summarize_trace(trace)
        corr = "n/a" if s.correlation is None else f"{s.correlation:.4f}"
        lines.append(
            f"[{name}] epochs: {len(trace)}  mean power: {s.mean_power / 1e9:.4f} GW "
            f"({s.mean_twh_per_year:.3f} TWh/yr)  min/max: {s.min_power / 1e9:.4f}/{s.max_power / 1e9:.4f} GW  "
            f"corr(revenue, hash rate): {corr}"
        )
    return "\n".join(lines)


def _simulate_one(path: str) -> tuple[str, str]:
    config = ingest.load_scenario(path)
    trace = minesim.run_simulation(config)
    return render_trace(trace, [c.id for c in config.cohorts]), summary_text(Path(path).name, trace)


def cmd_simulate(args, out: TextIO, err: TextIO) -> int:
    paths = args.scenario
    if len(paths) == 1:
        csv_text, summary = _simulate_one(paths[0])
        if args.out:
            Path(args.out).write_text(csv_text, encoding="utf-8")
        else:
            out.write(csv_text)
        print(summary, file=err)
        return EXIT_OK
    if not args.out:
        raise ValueError("--out DIR is required with several scenario files")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) != len(stems):
        raise ValueError("scenario file names must be distinct")
    with ProcessPoolExecutor(max_workers=min(len(paths), os.cpu_count() or 1)) as pool:
        results = list(pool.map(_simulate_one, paths))
    for stem, (csv_text, summary) in zip(stems, results):
        (out_dir / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
        print(summary, file=err)
    return EXIT_OK


def cmd_rollup(args, out: TextIO, err: TextIO) -> int:
    params = netenergy.RollupParams(args.gas_simple, args.gas_rollup, args.prover_w, args.tps)
    base_profile = netenergy.NetworkProfile(
        "network", args.nodes, args.per_node_j, args.tps, idle_power_per_node=args.idle_w or 0.0
    )
    before = netenergy.redundant_energy_per_tx(base_profile)
    factor = netenergy.gas_reduction_factor(params)
    prover = netenergy.prover_energy_per_tx(params)
    after = netenergy.rollup_energy_per_tx(before, factor, prover)
    cols = ["nodes", "before_j_per_tx", "gas_factor", "prover_j_per_tx", "after_j_per_tx", "saving"]
    row = [args.nodes, format_number(before), format_number(factor), format_number(prover),
           format_number(after), format_number(netenergy.savings_fraction(before, after))]
    if args.idle_w is not None:
        b_idle = netenergy.idle_adjusted_energy_per_tx(before, base_profile)
        a_idle = netenergy.idle_adjusted_energy_per_tx(after, base_profile)
        cols += ["before_idle_j_per_tx", "after_idle_j_per_tx", "saving_idle"]
        row += [format_number(b_idle), format_number(a_idle), format_number(netenergy.savings_fraction(b_idle, a_idle))]
    w = _writer(out)
    w.writerow(cols)
    w.writerow(row)
    if after > before:
        print("rollup increases energy per transaction for this network size", file=err)
    return EXIT_OK


def cmd_compare(args, out: TextIO, err: TextIO) -> int:
    profiles = ingest.load_networks_csv(args.networks or DATA_DIR / "networks.csv")
    report = netenergy.compare_architectures(profiles)
    w = _writer(out)
    w.writerow(["rank", "name", "energy_per_tx_j", "energy_per_tx_kwh", "order_of_magnitude"])
    for i, row in enumerate(report.rows, start=1):
        w.writerow([i, row.name, format_number(row.energy_per_tx), format_number(joules_to_kwh(row.energy_per_tx)),
                    row.order_of_magnitude])
    return EXIT_OK


CORRELATE_VARIABLES = ("revenue_per_eh", "hash_rate", "implied_hash_rate", "price_usd", "difficulty", "fees_per_block")


def _variable(name: str, s: est.MarketSample) -> float:
    if name == "revenue_per_eh":
        return est.revenue_per_exahash(s, BITCOIN)
    if name == "hash_rate":
        if s.observed_hash_rate is None:
            raise ValueError(f"{s.date}: hash_rate_ehs missing (use implied_hash_rate instead)")
        return s.observed_hash_rate
    if name == "implied_hash_rate":
        return est.network_hash_rate(s.difficulty, BITCOIN.target_block_time, BITCOIN)
    return float(getattr(s, name))


def cmd_correlate(args, out: TextIO, err: TextIO) -> int:
    series = _select_market(args.market, args.date_range)
    if len(series):
        series = ingest.resample_daily(series, ingest.ResamplePolicy.FORWARD_FILL)
    xs = [_variable(args.x, s) for s in series]
    ys = [_variable(args.y, s) for s in series]
    r = est.pearson_correlation(xs, ys)
    w = _writer(out)
    w.writerow(["x", "y", "n", "pearson_r"])
    w.writerow([args.x, args.y, len(xs), format_number(r)])
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blockwatt", description="Energy models for PoW and non-PoW ledgers (CSV on stdout).")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", help="lower/upper electricity bounds per market sample")
    b.add_argument("market", help="market CSV (date, price_usd, difficulty, subsidy, ...)")
    b.add_argument("hardware", nargs="?", help="hardware CSV (default: bundled catalog)")
    b.add_argument("--tariff", type=_positive_tariff, action="append",
                   help="electricity price in USD/kWh for the upper bound; repeatable (default 0.05)")
    b.add_argument("--efficiency", default="best",
                   help="'best' (most efficient device launched before the sample year), a catalog name, "
                        "or a J/H value (default best)")
    b.add_argument("--block-time", type=_number, default=BITCOIN.target_block_time,
                   help="average block time in s used to infer hash rate (default 600)")
    b.add_argument("--date-range", type=_date_range, help="inclusive START:END, ISO dates, either side optional")
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("margin", help="relative mining margin per device and date")
    m.add_argument("market", help="market CSV")
    m.add_argument("hardware_csv", nargs="?", metavar="hardware.csv", help="hardware CSV (default: bundled)")
    m.add_argument("--tariff", type=_positive_tariff, action="append", help="USD/kWh; repeatable (default 0.05)")
    m.add_argument("--hardware", nargs="+", metavar="NAME", help="catalog names (default: all)")
    m.add_argument("--date-range", type=_date_range, help="inclusive START:END")
    m.set_defaults(func=cmd_margin)

    j = sub.add_parser("project", help="consumption after future halvings at constant prices and fees")
    j.add_argument("--current-twh", type=_number, required=True, help="today's consumption, TWh/yr")
    j.add_argument("--fee-share", type=_number, required=True, help="fees as a fraction of mining revenue, 0..1")
    j.add_argument("--halvings", type=int, default=3, help="number of future halvings to tabulate (default 3)")
    j.set_defaults(func=cmd_project)

    s = sub.add_parser("simulate", help="run miner-market scenario files")
    s.add_argument("scenario", nargs="+", help="scenario file(s) (key = value)")
    s.add_argument("--out", help="trace CSV path (one scenario) or output directory (several)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rollup", help="energy per transaction with and without a zk-rollup")
    r.add_argument("--nodes", type=int, default=netenergy.LARGE_NETWORK_NODES, help="node count (default 10000)")
    r.add_argument("--per-node-j", type=_number, default=netenergy.PER_NODE_TX_ENERGY_J,
                   help="J per transaction and node (default 0.01)")
    r.add_argument("--gas-simple", type=_number, default=netenergy.LOOPRING_GAS_PER_TX * netenergy.ROUNDED_FACTOR,
                   help="gas of a plain transaction (default 36500, i.e. a factor of 100)")
    r.add_argument("--gas-rollup", type=_number, default=netenergy.LOOPRING_GAS_PER_TX,
                   help="gas per rollup transaction (default 365)")
    r.add_argument("--prover-w", type=_number, default=1050.0, help="prover power in W (default 1050)")
    r.add_argument("--tps", type=_number, default=netenergy.LOOPRING_MAX_TPS, help="throughput in tx/s (default 2100)")
    r.add_argument("--idle-w", type=_number, default=None, help="idle power per node in W; adds idle-adjusted columns")
    r.set_defaults(func=cmd_rollup)

    c = sub.add_parser("compare", help="rank architectures by energy per transaction")
    c.add_argument("networks", nargs="?", help="networks CSV (default: bundled five-way comparison)")
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("correlate", help="Pearson correlation of two market variables on daily data")
    k.add_argument("market", help="market CSV")
    k.add_argument("--x", choices=CORRELATE_VARIABLES, default="revenue_per_eh")
    k.add_argument("--y", choices=CORRELATE_VARIABLES, default="hash_rate")
    k.add_argument("--date-range", type=_date_range, help="inclusive START:END")
    k.set_defaults(func=cmd_correlate)
    return p


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args, out, err)
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO
    except est.ZeroVarianceError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
