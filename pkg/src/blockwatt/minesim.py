"""Deterministic agent-based model of the PoW mining market.

Cohorts of identical devices switch on or off depending on their relative
margin, difficulty retargets once per epoch and the subsidy halves on
schedule. Time advances in fluid segments: block production within a segment
is the expected value ``elapsed * hash_rate / hashes_per_block``.
"""

from __future__ import annotations

import datetime as dt
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from blockwatt.estimators import (
    MarketSample,
    MarketSeries,
    ZeroVarianceError,
    difficulty_for_hash_rate,
    expected_hashes_per_block,
    pearson_correlation,
    relative_margin,
)
from blockwatt.units import (
    HASHES_PER_EH,
    ChainSpec,
    EnergyEstimate,
    EstimateKind,
    HardwareProfile,
    Tariff,
)

SECONDS_PER_DAY = 86_400.0


def natural_key(text: str) -> tuple:
    """Sort key that orders "2" before "10"."""
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text))


@dataclass(frozen=True)
class MinerCohort:
    id: str
    hardware: HardwareProfile
    tariff: Tariff
    capacity: float  # H/s
    active: bool = True

    def __post_init__(self) -> None:
        if not self.capacity > 0:
            raise ValueError(f"cohort {self.id}: capacity must be > 0")
        if not self.tariff.usd_per_kwh > 0:
            raise ValueError(f"cohort {self.id}: tariff must be > 0")

    @property
    def power(self) -> float:
        """Draw when active, W."""
        return self.capacity * self.hardware.efficiency

    @property
    def breakeven(self) -> float:
        """Revenue rate (USD/EH) at which the cohort's margin is zero."""
        return self.hardware.efficiency * self.tariff.usd_per_joule * HASHES_PER_EH

    def margin(self, revenue_rate: float) -> float:
        return relative_margin(self.hardware, self.tariff, revenue_rate)


class Cadence(str, Enum):
    PER_EPOCH = "per_epoch"
    PER_DAY = "per_day"


@dataclass(frozen=True)
class SimConfig:
    spec: ChainSpec
    cohorts: tuple[MinerCohort, ...]
    price_path: MarketSeries
    start_difficulty: float
    duration: int  # retarget epochs
    hysteresis: float = 0.0
    decision_cadence: Cadence = Cadence.PER_EPOCH
    start_height: int = 0
    start_date: dt.date | None = None  # defaults to the first price sample

    def __post_init__(self) -> None:
        object.__setattr__(self, "cohorts", tuple(self.cohorts))
        object.__setattr__(self, "decision_cadence", Cadence(self.decision_cadence))
        if not self.cohorts:
            raise ValueError("at least one cohort is required")
        ids = [c.id for c in self.cohorts]
        if len(set(ids)) != len(ids):
            raise ValueError("cohort ids must be unique")
        if not self.start_difficulty > 0:
            raise ValueError("start_difficulty must be > 0")
        if self.duration < 1:
            raise ValueError("duration must be >= 1 epoch")
        if not self.hysteresis >= 0:
            raise ValueError("hysteresis must be >= 0")
        if self.start_height < 0:
            raise ValueError("start_height must be >= 0")
        if len(self.price_path) == 0:
            raise ValueError("price path is empty")

    @property
    def first_date(self) -> dt.date:
        return self.start_date or self.price_path[0].date


@dataclass(frozen=True)
class EpochRecord:
    epoch_index: int
    sim_time: float  # s, at epoch end
    height: int  # at epoch end
    difficulty: float
    hash_rate: float  # H/s, epoch average
    power: float  # W, epoch average
    subsidy: float  # at the first block of the epoch
    revenue_per_eh: float  # USD/EH at the last decision in the epoch
    block_time: float  # s
    duration: float  # s
    per_cohort_margin: Mapping[str, float] = field(default_factory=dict)
    active_share: Mapping[str, float] = field(default_factory=dict)  # time-weighted, 0..1


@dataclass
class SimTrace:
    records: list[EpochRecord]
    outcome: str = "completed"  # or "stalled"
    detail: str = ""

    @property
    def stalled(self) -> bool:
        return self.outcome == "stalled"

    def __len__(self) -> int:
        return len(self.records)


def block_subsidy(height: int, spec: ChainSpec) -> float:
    if height < 0:
        raise ValueError("height must be >= 0")
    return math.ldexp(spec.initial_subsidy, -(height // spec.halving_interval))


def cumulative_supply(height: int | float, spec: ChainSpec) -> float:
    """Coins issued by all blocks below ``height``; ``math.inf`` gives the cap."""
    if height < 0:
        raise ValueError("height must be >= 0")
    s0, n = spec.initial_subsidy, spec.halving_interval
    if math.isinf(height):
        return 2.0 * s0 * n
    eras, rem = divmod(int(height), n)
    full = 2.0 * s0 * n * (1.0 - math.ldexp(1.0, -eras))
    return full + rem * math.ldexp(s0, -eras)


def retarget_difficulty(old: float, actual_epoch_duration: float, spec: ChainSpec) -> float:
    if not old > 0:
        raise ValueError("difficulty must be > 0")
    if not actual_epoch_duration > 0:
        raise ValueError("epoch duration must be > 0")
    ratio = spec.retarget_epoch * spec.target_block_time / actual_epoch_duration
    ratio = min(max(ratio, 1.0 / spec.retarget_clamp), spec.retarget_clamp)
    return old * ratio


def participation_update(
    cohorts: Sequence[MinerCohort], revenue_rate: float, hysteresis: float
) -> tuple[MinerCohort, ...]:
    if hysteresis < 0:
        raise ValueError("hysteresis must be >= 0")
    out = []
    for c in cohorts:
        m = c.margin(revenue_rate)
        if c.active and m < -hysteresis:
            c = replace(c, active=False)
        elif not c.active and m > hysteresis:
            c = replace(c, active=True)
        out.append(c)
    return tuple(out)


def anticipatory_update(
    cohorts: Sequence[MinerCohort], reward_usd: float, spec: ChainSpec, hysteresis: float
) -> tuple[MinerCohort, ...]:
    """Daily decisions on hashprice rather than on the current difficulty.

    Each cohort values a hash at ``reward_usd`` per block spread over the
    network hash rate at the target block time, counting its own capacity.
    Exits are taken most expensive first, entries cheapest first, repeated
    until nobody moves.
    """
    if hysteresis < 0:
        raise ValueError("hysteresis must be >= 0")
    state = {c.id: c for c in cohorts}
    total = sum(c.capacity for c in cohorts if c.active)

    def rate_at(h: float) -> float:
        return reward_usd * HASHES_PER_EH / (h * spec.target_block_time) if h > 0 else math.inf

    for _ in range(4 * len(state) + 1):
        moved = False
        for c in reversed(merit_order(c for c in state.values() if c.active)):
            if c.margin(rate_at(total)) < -hysteresis:
                state[c.id] = replace(c, active=False)
                total -= c.capacity
                moved = True
        for c in merit_order(c for c in state.values() if not c.active):
            if reward_usd > 0 and c.margin(rate_at(total + c.capacity)) > hysteresis:
                state[c.id] = replace(c, active=True)
                total += c.capacity
                moved = True
        if not moved:
            break
    return tuple(state[c.id] for c in cohorts)


def _revenue_at_hash_rate(hash_rate: float, sample: MarketSample, spec: ChainSpec) -> float:
    # difficulty implied by hash_rate at the target block time
    return sample.block_reward * sample.price_usd * HASHES_PER_EH / (hash_rate * spec.target_block_time)


def merit_order(cohorts: Iterable[MinerCohort]) -> list[MinerCohort]:
    return sorted(cohorts, key=lambda c: (c.breakeven, natural_key(c.id)))


def equilibrium_set(cohorts: Sequence[MinerCohort], sample: MarketSample, spec: ChainSpec) -> frozenset[str]:
    """Ids of the cohorts active in the merit-order equilibrium.

    Cohorts are offered entry cheapest first and join when they break even at
    the difficulty implied by the joint hash rate, otherwise they are skipped.
    Every member then has a non-negative margin and every outsider would run
    at a loss if it joined. Among all such stable sets this is the one that
    prefers cheaper cohorts (lexicographically greatest in merit order).
    """
    if sample.block_reward * sample.price_usd <= 0:
        return frozenset()
    chosen: list[str] = []
    total = 0.0
    for c in merit_order(cohorts):
        trial = total + c.capacity
        if c.margin(_revenue_at_hash_rate(trial, sample, spec)) >= 0:
            chosen.append(c.id)
            total = trial
    return frozenset(chosen)


def equilibrium_hash_rate(cohorts: Sequence[MinerCohort], sample: MarketSample, spec: ChainSpec) -> float:
    """Hash rate (H/s) of the merit-order equilibrium; 0 for an empty network."""
    ids = equilibrium_set(cohorts, sample, spec)
    return sum(c.capacity for c in cohorts if c.id in ids)


def seed_equilibrium(config: SimConfig) -> SimConfig:
    """Start ``config`` at equilibrium for its first price sample."""
    sample = config.price_path.at(config.first_date)
    sample = replace(sample, subsidy=block_subsidy(config.start_height, config.spec))
    ids = equilibrium_set(config.cohorts, sample, config.spec)
    rate = sum(c.capacity for c in config.cohorts if c.id in ids)
    if rate <= 0:
        raise ValueError("no cohort is profitable at the starting price")
    cohorts = tuple(replace(c, active=c.id in ids) for c in config.cohorts)
    return replace(config, cohorts=cohorts, start_difficulty=difficulty_for_hash_rate(rate, config.spec))


class _Stalled(Exception):
    pass


def run_simulation(config: SimConfig) -> SimTrace:
    """Run the epoch loop; see the module docstring for the time model.

    ``Cadence.PER_EPOCH``: cohorts decide at every epoch start and halving
    height on the revenue per hash at the current difficulty.
    ``Cadence.PER_DAY``: cohorts decide at every day boundary and halving
    height on hashprice at the target block time (:func:`anticipatory_update`).

    A chain with no hash rate for a full nominal epoch stops with
    ``outcome="stalled"``.
    """
    spec = config.spec
    per_day = config.decision_cadence is Cadence.PER_DAY
    nominal_epoch = spec.retarget_epoch * spec.target_block_time
    start_date = config.first_date

    cohorts = config.cohorts
    difficulty = config.start_difficulty
    height = config.start_height
    t = 0.0
    records: list[EpochRecord] = []

    for epoch in range(config.duration):
        hashes_per_block = expected_hashes_per_block(difficulty, spec)
        epoch_subsidy = block_subsidy(height, spec)
        done = 0.0  # blocks of this epoch, fractional
        energy = 0.0
        active_time = {c.id: 0.0 for c in cohorts}
        idle_time = 0.0
        epoch_time = 0.0  # summed per segment so shares of a full epoch are exactly 1
        revenue = 0.0
        margins: dict[str, float] = {}

        while done < spec.retarget_epoch:
            cur_height = height + int(done)
            day = start_date + dt.timedelta(days=int(t // SECONDS_PER_DAY))
            sample = config.price_path.at(day)
            reward = block_subsidy(cur_height, spec) + sample.fees_per_block
            revenue = reward * sample.price_usd / hashes_per_block * HASHES_PER_EH
            if per_day:
                cohorts = anticipatory_update(cohorts, reward * sample.price_usd, spec, config.hysteresis)
            else:
                cohorts = participation_update(cohorts, revenue, config.hysteresis)
            margins = {c.id: c.margin(revenue) for c in cohorts}
            active = [c for c in cohorts if c.active]
            rate = sum(c.capacity for c in active)

            next_halving = (cur_height // spec.halving_interval + 1) * spec.halving_interval
            block_limit = min(spec.retarget_epoch, next_halving - height)
            time_limit = math.inf
            if per_day:
                time_limit = (math.floor(t / SECONDS_PER_DAY) + 1) * SECONDS_PER_DAY - t

            if rate <= 0:
                if not per_day:
                    return SimTrace(records, "stalled", _stall_detail(epoch, height + int(done), t))
                idle_time += time_limit
                epoch_time += time_limit
                t += time_limit
                if idle_time >= nominal_epoch:
                    return SimTrace(records, "stalled", _stall_detail(epoch, height + int(done), t))
                continue

            blocks = block_limit - done
            elapsed = blocks * hashes_per_block / rate
            if elapsed > time_limit:
                elapsed = time_limit
                blocks = elapsed * rate / hashes_per_block
                # a block boundary inside float rounding of the day edge
                if done + blocks > block_limit:
                    blocks = block_limit - done
            done = block_limit if blocks == block_limit - done else done + blocks
            t += elapsed
            epoch_time += elapsed
            energy += elapsed * sum(c.power for c in active)
            for c in active:
                active_time[c.id] += elapsed

        height += spec.retarget_epoch
        records.append(
            EpochRecord(
                epoch_index=epoch,
                sim_time=t,
                height=height,
                difficulty=difficulty,
                hash_rate=spec.retarget_epoch * hashes_per_block / epoch_time,
                power=energy / epoch_time,
                subsidy=epoch_subsidy,
                revenue_per_eh=revenue,
                block_time=epoch_time / spec.retarget_epoch,
                duration=epoch_time,
                per_cohort_margin=margins,
                active_share={k: v / epoch_time for k, v in active_time.items()},
            )
        )
        difficulty = retarget_difficulty(difficulty, epoch_time, spec)

    return SimTrace(records)


def _stall_detail(epoch: int, height: int, t: float) -> str:
    return f"no hash rate for a full epoch (epoch {epoch}, height {height}, t={t:.0f} s)"


@dataclass(frozen=True)
class TraceSummary:
    estimates: list[EnergyEstimate]
    mean_power: float  # W, time-weighted
    min_power: float
    max_power: float
    correlation: float | None  # revenue rate vs hash rate, None when undefined

    @property
    def mean_twh_per_year(self) -> float:
        from blockwatt.units import watts_to_twh_per_year

        return watts_to_twh_per_year(self.mean_power)


def summarize_trace(trace: SimTrace) -> TraceSummary:
    if not trace.records:
        raise ValueError("empty trace")
    recs = trace.records
    estimates = [EnergyEstimate.from_power(r.power, EstimateKind.SIMULATED, epoch=r.epoch_index) for r in recs]
    durations = [r.duration for r in recs]
    mean = sum(r.power * d for r, d in zip(recs, durations)) / sum(durations)
    corr = None
    if len(recs) >= 2:
        try:
            corr = pearson_correlation([r.revenue_per_eh for r in recs], [r.hash_rate for r in recs])
        except ZeroVarianceError:
            corr = None
    powers = [r.power for r in recs]
    return TraceSummary(estimates, mean, min(powers), max(powers), corr)
