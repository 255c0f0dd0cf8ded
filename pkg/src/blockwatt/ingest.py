"""Loading, validation and rendering of the CSV datasets and scenario files.

Numbers are parsed without locale ('.' decimal separator, optional
exponent); ``nan``/``inf`` and digit separators are rejected.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import re
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from blockwatt.estimators import MarketSample, MarketSeries
from blockwatt.netenergy import NetworkProfile
from blockwatt.units import BITCOIN, ChainSpec, HardwareProfile, Tariff

MARKET_COLUMNS = ("date", "price_usd", "difficulty", "subsidy", "fees_per_block", "hash_rate_ehs")
MARKET_REQUIRED = MARKET_COLUMNS[:4]
HARDWARE_COLUMNS = ("name", "launch_year", "hash_rate_ths", "power_w")
NETWORK_COLUMNS = (
    "name",
    "node_count",
    "energy_per_tx_per_node_j",
    "idle_power_per_node_w",
    "throughput_tps",
    "consensus_overhead_j",
)

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_INTEGER = re.compile(r"[+-]?\d+")


class DataError(ValueError):
    """Invalid input data; ``line`` is 1-based when known."""

    def __init__(self, message: str, source: str | Path | None = None, line: int | None = None):
        self.source = str(source) if source is not None else None
        self.line = line
        where = ""
        if self.source:
            where = self.source + (f":{line}" if line else "") + ": "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


def parse_number(text: str) -> float:
    text = text.strip()
    if not _NUMBER.fullmatch(text):
        raise ValueError(f"not a number: {text!r}")
    return float(text)


def parse_int(text: str) -> int:
    text = text.strip()
    if not _INTEGER.fullmatch(text):
        raise ValueError(f"not an integer: {text!r}")
    return int(text)


def parse_date(text: str) -> dt.date:
    text = text.strip()
    if not re.fullmatch(r"\d{4}-\d{2}-\d{2}", text):
        raise ValueError(f"not an ISO date (YYYY-MM-DD): {text!r}")
    return dt.date.fromisoformat(text)


def format_number(x: float) -> str:
    """Shortest text that parses back to ``x``; integral values lose the '.0'."""
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def parse_scaled(text: str, exponent: int) -> float:
    """Parse ``text`` and multiply by 10**exponent without binary rounding drift."""
    parse_number(text)
    return float(Decimal(text.strip()).scaleb(exponent))


def format_scaled(x: float, exponent: int) -> str:
    """Inverse of :func:`parse_scaled`: ``x`` divided by 10**exponent, shortest form."""
    d = Decimal(repr(float(x))).scaleb(-exponent).normalize()
    return format(d, "f") if -7 < d.adjusted() < 16 else str(d)


def _rows(path: str | Path, columns: Sequence[str], required: Sequence[str]) -> Iterable[tuple[int, dict[str, str]]]:
    """Yield (line number, row) pairs; leading '#' lines are comments."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        raise DataError("missing header row", path)
    header_line, header_text = body[0]
    header = [h.strip() for h in next(csv.reader([header_text]))]
    unknown = [h for h in header if h not in columns]
    if unknown:
        raise DataError(f"unknown column {unknown[0]!r}", path, header_line)
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"missing column {missing[0]!r}", path, header_line)
    if len(set(header)) != len(header):
        raise DataError("duplicate column in header", path, header_line)
    for lineno, text in body[1:]:
        cells = next(csv.reader([text]))
        if len(cells) != len(header):
            raise DataError(f"expected {len(header)} cells, got {len(cells)}", path, lineno)
        yield lineno, dict(zip(header, cells))


def _parse_rows(path, columns, required, build: Callable[[dict[str, str]], object]) -> list:
    out = []
    for lineno, row in _rows(path, columns, required):
        try:
            out.append(build(row))
        except ValueError as exc:
            raise DataError(str(exc), path, lineno) from None
    return out


def _optional(row: dict[str, str], key: str) -> str:
    return row.get(key, "").strip()


def _market_row(row: dict[str, str]) -> MarketSample:
    fees = _optional(row, "fees_per_block")
    hr = _optional(row, "hash_rate_ehs")
    return MarketSample(
        date=parse_date(row["date"]),
        price_usd=parse_number(row["price_usd"]),
        difficulty=parse_number(row["difficulty"]),
        subsidy=parse_number(row["subsidy"]),
        fees_per_block=parse_number(fees) if fees else 0.0,
        observed_hash_rate=parse_scaled(hr, 18) if hr else None,
    )


def load_market_csv(path: str | Path) -> MarketSeries:
    samples: list[MarketSample] = []
    for lineno, row in _rows(path, MARKET_COLUMNS, MARKET_REQUIRED):
        try:
            sample = _market_row(row)
        except ValueError as exc:
            raise DataError(str(exc), path, lineno) from None
        if samples and sample.date == samples[-1].date:
            raise DataError(f"duplicate date {sample.date}", path, lineno)
        if samples and sample.date < samples[-1].date:
            raise DataError(f"dates not increasing: {sample.date} after {samples[-1].date}", path, lineno)
        samples.append(sample)
    return MarketSeries(samples)


def render_market_csv(series: Iterable[MarketSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MARKET_COLUMNS)
    for s in series:
        hr = "" if s.observed_hash_rate is None else format_scaled(s.observed_hash_rate, 18)
        w.writerow(
            [
                s.date.isoformat(),
                format_number(s.price_usd),
                format_number(s.difficulty),
                format_number(s.subsidy),
                format_number(s.fees_per_block),
                hr,
            ]
        )
    return buf.getvalue()


def _hardware_row(row: dict[str, str]) -> HardwareProfile:
    name = row["name"].strip()
    if not name:
        raise ValueError("empty hardware name")
    return HardwareProfile(
        name=name,
        launch_year=parse_int(row["launch_year"]),
        hash_rate=parse_scaled(row["hash_rate_ths"], 12),
        power=parse_number(row["power_w"]),
    )


def load_hardware_csv(path: str | Path) -> list[HardwareProfile]:
    profiles = _parse_rows(path, HARDWARE_COLUMNS, HARDWARE_COLUMNS, _hardware_row)
    seen: set[str] = set()
    for p in profiles:
        if p.name in seen:
            raise DataError(f"duplicate hardware name {p.name!r}", path)
        seen.add(p.name)
    return profiles


def render_hardware_csv(profiles: Iterable[HardwareProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HARDWARE_COLUMNS)
    for p in profiles:
        w.writerow([p.name, str(p.launch_year), format_scaled(p.hash_rate, 12), format_number(p.power)])
    return buf.getvalue()


def _network_row(row: dict[str, str]) -> NetworkProfile:
    def num(key: str, default: float = 0.0) -> float:
        text = _optional(row, key)
        return parse_number(text) if text else default

    name = row["name"].strip()
    if not name:
        raise ValueError("empty network name")
    return NetworkProfile(
        name=name,
        node_count=parse_int(row["node_count"]),
        energy_per_tx_per_node=parse_number(row["energy_per_tx_per_node_j"]),
        throughput=parse_number(row["throughput_tps"]),
        idle_power_per_node=num("idle_power_per_node_w"),
        consensus_overhead_per_tx=num("consensus_overhead_j"),
    )


def load_networks_csv(path: str | Path) -> list[NetworkProfile]:
    required = ("name", "node_count", "energy_per_tx_per_node_j", "throughput_tps")
    return _parse_rows(path, NETWORK_COLUMNS, required, _network_row)


def render_networks_csv(profiles: Iterable[NetworkProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NETWORK_COLUMNS)
    for p in profiles:
        w.writerow(
            [
                p.name,
                str(p.node_count),
                format_number(p.energy_per_tx_per_node),
                format_number(p.idle_power_per_node),
                format_number(p.throughput),
                format_number(p.consensus_overhead_per_tx),
            ]
        )
    return buf.getvalue()


class ResamplePolicy(str, Enum):
    FORWARD_FILL = "forward_fill"
    STRICT = "strict"


def resample_daily(series: MarketSeries, policy: ResamplePolicy | str = ResamplePolicy.FORWARD_FILL) -> MarketSeries:
    """One sample per calendar day from the first to the last date."""
    policy = ResamplePolicy(policy)
    if len(series) == 0:
        raise ValueError("cannot resample an empty series")
    out: list[MarketSample] = []
    missing: list[dt.date] = []
    by_date = {s.date: s for s in series}
    day, last = series[0].date, series[-1].date
    prev = series[0]
    while day <= last:
        s = by_date.get(day)
        if s is None:
            missing.append(day)
            s = MarketSample(day, prev.price_usd, prev.difficulty, prev.subsidy, prev.fees_per_block, prev.observed_hash_rate)
        out.append(s)
        prev = s
        day += dt.timedelta(days=1)
    if missing and policy is ResamplePolicy.STRICT:
        shown = ", ".join(d.isoformat() for d in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"gaps in daily series: {shown}{more}")
    return MarketSeries(out)


@dataclass(frozen=True)
class Dataset:
    market: MarketSeries
    hardware: list[HardwareProfile]
    networks: list[NetworkProfile]

    def hardware_named(self, name: str) -> HardwareProfile:
        for hw in self.hardware:
            if hw.name == name:
                return hw
        raise DataError(f"unknown hardware {name!r}")


def load_dataset(market: str | Path, hardware: str | Path, networks: str | Path) -> Dataset:
    return Dataset(load_market_csv(market), load_hardware_csv(hardware), load_networks_csv(networks))


# --- scenario files -------------------------------------------------------

_CHAIN_KEYS: dict[str, tuple[str, Callable[[str], object]]] = {
    "chain.name": ("name", str),
    "chain.target_block_time_s": ("target_block_time", parse_number),
    "chain.retarget_epoch": ("retarget_epoch", parse_int),
    "chain.halving_interval": ("halving_interval", parse_int),
    "chain.initial_subsidy": ("initial_subsidy", parse_number),
    "chain.hashes_per_difficulty_unit": ("hashes_per_difficulty_unit", parse_number),
    "chain.retarget_clamp": ("retarget_clamp", parse_number),
}

_SIM_KEYS = {
    "sim.start_difficulty",
    "sim.duration_epochs",
    "sim.hysteresis",
    "sim.decision_cadence",
    "sim.start_height",
    "sim.start_date",
    "sim.seed_equilibrium",
}
_PRICE_KEYS = {"price.usd", "price.fees_per_block", "price.fee_share"}
_SHOCK_KEYS = ("shock.start_day", "shock.days", "shock.factor")
_OTHER_KEYS = {"market.csv", "catalog.path"}
_COHORT_FIELDS = {"hardware", "tariff_usd_kwh", "capacity_ehs", "active"}
_COHORT_KEY = re.compile(r"cohort\.([A-Za-z0-9_-]+)\.([a-z_]+)")

SCENARIO_KEYS = sorted(set(_CHAIN_KEYS) | _SIM_KEYS | _PRICE_KEYS | set(_SHOCK_KEYS) | _OTHER_KEYS) + [
    f"cohort.<id>.{f}" for f in sorted(_COHORT_FIELDS)
]


class ScenarioError(DataError):
    def __init__(self, message: str, key: str | None = None, source=None, line=None):
        self.key = key
        super().__init__(message, source, line)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_scenario_text(text: str, source: str | Path | None = None) -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value, line)`` map with syntax and key-name checks."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", None, source, lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        m = _COHORT_KEY.fullmatch(key)
        known = key in _CHAIN_KEYS or key in _SIM_KEYS or key in _PRICE_KEYS or key in _SHOCK_KEYS or key in _OTHER_KEYS
        if m:
            known = m.group(2) in _COHORT_FIELDS
        if not known:
            raise ScenarioError(f"unknown key {key!r}", key, source, lineno)
        if key in entries:
            raise ScenarioError(f"duplicate key {key!r}", key, source, lineno)
        if not value:
            raise ScenarioError(f"empty value for {key!r}", key, source, lineno)
        entries[key] = (value, lineno)
    return entries


def load_scenario(path: str | Path, catalog: Sequence[HardwareProfile] | None = None):
    """Parse and validate a scenario file into a :class:`~blockwatt.minesim.SimConfig`."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return scenario_from_text(text, base_dir=path.parent, source=path, catalog=catalog)


def scenario_from_text(
    text: str,
    base_dir: str | Path = ".",
    source: str | Path | None = None,
    catalog: Sequence[HardwareProfile] | None = None,
):
    from blockwatt import minesim
    from blockwatt.units import load_catalog

    entries = parse_scenario_text(text, source)
    base_dir = Path(base_dir)

    def get(key: str, conv: Callable[[str], object], default=None, required: bool = False):
        if key not in entries:
            if required:
                raise ScenarioError(f"missing required key {key!r}", key, source)
            return default
        value, lineno = entries[key]
        try:
            return conv(value)
        except ValueError as exc:
            raise ScenarioError(f"{key}: {exc}", key, source, lineno) from None

    chain_kwargs = {}
    for key, (attr, conv) in _CHAIN_KEYS.items():
        v = get(key, conv)
        if v is not None:
            chain_kwargs[attr] = v
    try:
        spec = ChainSpec(**{**BITCOIN.__dict__, **chain_kwargs})
    except ValueError as exc:
        raise ScenarioError(f"chain: {exc}", "chain", source) from None

    if "catalog.path" in entries:
        cat_path = base_dir / get("catalog.path", str)
        if catalog is None:
            try:
                catalog = load_catalog(cat_path)
            except OSError as exc:
                raise ScenarioError(f"catalog.path: {exc}", "catalog.path", source) from None
    if catalog is None:
        catalog = load_catalog()
    by_name = {hw.name: hw for hw in catalog}

    start_height = get("sim.start_height", parse_int, 0)
    if start_height < 0:
        raise ScenarioError("sim.start_height must be >= 0", "sim.start_height", source)

    # price path
    if "market.csv" in entries and "price.usd" in entries:
        raise ScenarioError("give either market.csv or price.usd, not both", "market.csv", source)
    if "market.csv" in entries:
        conflict = sorted(_PRICE_KEYS & entries.keys())
        if conflict:
            raise ScenarioError(f"{conflict[0]} conflicts with market.csv", conflict[0], source)
        try:
            path = load_market_csv(base_dir / get("market.csv", str))
        except OSError as exc:
            raise ScenarioError(f"market.csv: {exc}", "market.csv", source) from None
        if len(path) == 0:
            raise ScenarioError("market.csv has no rows", "market.csv", source)
    elif "price.usd" in entries:
        price = get("price.usd", parse_number)
        date0 = get("sim.start_date", parse_date, dt.date(2020, 1, 1))
        subsidy = minesim.block_subsidy(start_height, spec)
        if "price.fees_per_block" in entries and "price.fee_share" in entries:
            raise ScenarioError("give price.fees_per_block or price.fee_share, not both", "price.fee_share", source)
        if "price.fee_share" in entries:
            share = get("price.fee_share", parse_number)
            if not 0 <= share < 1:
                raise ScenarioError("price.fee_share must be in [0, 1)", "price.fee_share", source)
            fees = subsidy * share / (1 - share)
        else:
            fees = get("price.fees_per_block", parse_number, 0.0)
        try:
            path = _constant_path(date0, price, fees, subsidy, entries, get, source)
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(str(exc), "price.usd", source) from None
    else:
        raise ScenarioError("missing required key 'price.usd' (or 'market.csv')", "price.usd", source)

    # cohorts
    fields: dict[str, dict[str, tuple[str, int]]] = {}
    for key, (value, lineno) in entries.items():
        m = _COHORT_KEY.fullmatch(key)
        if m:
            fields.setdefault(m.group(1), {})[m.group(2)] = (value, lineno)
    if not fields:
        raise ScenarioError("missing required key 'cohort.<id>.hardware' (no cohorts)", "cohort", source)
    cohorts = []
    for cid in sorted(fields, key=minesim.natural_key):
        f = fields[cid]
        for req in ("hardware", "tariff_usd_kwh", "capacity_ehs"):
            if req not in f:
                raise ScenarioError(f"missing required key 'cohort.{cid}.{req}'", f"cohort.{cid}.{req}", source)
        hw_name, hw_line = f["hardware"]
        if hw_name not in by_name:
            key = f"cohort.{cid}.hardware"
            raise ScenarioError(f"{key}: unknown hardware {hw_name!r}", key, source, hw_line)
        tariff = get(f"cohort.{cid}.tariff_usd_kwh", parse_number)
        cap = get(f"cohort.{cid}.capacity_ehs", parse_number)
        active = get(f"cohort.{cid}.active", _parse_bool, True)
        try:
            cohorts.append(minesim.MinerCohort(cid, by_name[hw_name], Tariff(tariff), parse_scaled(entries[f"cohort.{cid}.capacity_ehs"][0], 18), active))
        except ValueError as exc:
            raise ScenarioError(str(exc), f"cohort.{cid}", source) from None

    seed = get("sim.seed_equilibrium", _parse_bool, False)
    start_difficulty = get("sim.start_difficulty", parse_number, None, required=not seed)
    cadence = get("sim.decision_cadence", minesim.Cadence, minesim.Cadence.PER_EPOCH)
    try:
        config = minesim.SimConfig(
            spec=spec,
            cohorts=tuple(cohorts),
            price_path=path,
            start_difficulty=start_difficulty if start_difficulty is not None else 1.0,
            duration=get("sim.duration_epochs", parse_int, required=True),
            hysteresis=get("sim.hysteresis", parse_number, 0.0),
            decision_cadence=cadence,
            start_height=start_height,
            start_date=get("sim.start_date", parse_date, None),
        )
        if seed:
            config = minesim.seed_equilibrium(config)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc), "sim", source) from None
    return config


def _constant_path(date0, price, fees, subsidy, entries, get, source) -> MarketSeries:
    """Constant price, optionally scaled by ``shock.factor`` for a window of days."""
    placeholder_difficulty = 1.0  # unused by the simulator
    base = MarketSample(date0, price, placeholder_difficulty, subsidy, fees)
    if not _SHOCK_KEYS & entries.keys():
        return MarketSeries([base])
    for k in _SHOCK_KEYS:
        if k not in entries:
            raise ScenarioError(f"missing required key {k!r}", k, source)
    start = get("shock.start_day", parse_int)
    days = get("shock.days", parse_int)
    factor = get("shock.factor", parse_number)
    if start < 1 or days < 1 or factor < 0:
        raise ScenarioError("shock needs start_day >= 1, days >= 1, factor >= 0", "shock.start_day", source)
    d1 = date0 + dt.timedelta(days=start)
    d2 = d1 + dt.timedelta(days=days)
    shocked = MarketSample(d1, price * factor, placeholder_difficulty, subsidy, fees)
    back = MarketSample(d2, price, placeholder_difficulty, subsidy, fees)
    return MarketSeries([base, shocked, back])
