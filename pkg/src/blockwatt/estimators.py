"""Analytical estimators for PoW networks.

Hash rate from difficulty, lower/upper electricity bounds, revenue per
exahash, relative mining margins, halving projections and a few scaling
helpers.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from blockwatt.units import (
    HASHES_PER_EH,
    JOULES_PER_KWH,
    SECONDS_PER_YEAR,
    ChainSpec,
    EnergyEstimate,
    EstimateKind,
    HardwareProfile,
    Tariff,
)


@dataclass(frozen=True)
class MarketSample:
    date: dt.date
    price_usd: float
    difficulty: float
    subsidy: float
    fees_per_block: float = 0.0
    observed_hash_rate: float | None = None  # H/s

    def __post_init__(self) -> None:
        if not self.price_usd >= 0:
            raise ValueError(f"{self.date}: price_usd must be >= 0")
        if not self.difficulty > 0:
            raise ValueError(f"{self.date}: difficulty must be > 0")
        if not self.fees_per_block >= 0:
            raise ValueError(f"{self.date}: fees_per_block must be >= 0")
        if not self.subsidy >= 0:
            raise ValueError(f"{self.date}: subsidy must be >= 0")
        if self.observed_hash_rate is not None and not self.observed_hash_rate >= 0:
            raise ValueError(f"{self.date}: observed_hash_rate must be >= 0")

    @classmethod
    def with_fee_share(
        cls,
        date: dt.date,
        price_usd: float,
        difficulty: float,
        subsidy: float,
        fee_share: float,
        observed_hash_rate: float | None = None,
    ) -> "MarketSample":
        """Build a sample whose fees are ``fee_share`` of the total block reward."""
        if not 0 <= fee_share < 1:
            raise ValueError("fee_share must be in [0, 1)")
        fees = subsidy * fee_share / (1.0 - fee_share)
        return cls(date, price_usd, difficulty, subsidy, fees, observed_hash_rate)

    @property
    def block_reward(self) -> float:
        return self.subsidy + self.fees_per_block

    @property
    def fee_share(self) -> float:
        return self.fees_per_block / self.block_reward if self.block_reward else 0.0


class MarketSeries(Sequence[MarketSample]):
    """Immutable, strictly date-ordered sequence of samples."""

    def __init__(self, samples: Sequence[MarketSample]):
        samples = tuple(samples)
        for prev, cur in zip(samples, samples[1:]):
            if cur.date <= prev.date:
                raise ValueError(f"dates must be strictly increasing: {prev.date} then {cur.date}")
        self._samples = samples

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return MarketSeries(self._samples[i])
        return self._samples[i]

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[MarketSample]:
        return iter(self._samples)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MarketSeries) and self._samples == other._samples

    def __repr__(self) -> str:
        return f"MarketSeries({len(self)} samples)"

    @property
    def dates(self) -> list[dt.date]:
        return [s.date for s in self._samples]

    def between(self, start: dt.date | None = None, end: dt.date | None = None) -> "MarketSeries":
        return MarketSeries(
            [s for s in self._samples if (start is None or s.date >= start) and (end is None or s.date <= end)]
        )

    def at(self, day: dt.date) -> MarketSample:
        """Latest sample on or before ``day`` (the first sample before the series starts)."""
        if not self._samples:
            raise ValueError("empty series")
        lo, hi = 0, len(self._samples)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._samples[mid].date <= day:
                lo = mid + 1
            else:
                hi = mid
        return self._samples[max(lo - 1, 0)]


@dataclass(frozen=True)
class RewardPerHashPoint:
    date: dt.date
    usd_per_exahash: float


def expected_hashes_per_block(difficulty: float, spec: ChainSpec) -> float:
    if not difficulty > 0:
        raise ValueError("difficulty must be > 0")
    return difficulty * spec.hashes_per_difficulty_unit


def network_hash_rate(difficulty: float, avg_block_time: float, spec: ChainSpec) -> float:
    """Expected hash rate (H/s) implied by a difficulty and an average block time."""
    if not avg_block_time > 0:
        raise ValueError("avg_block_time must be > 0")
    return expected_hashes_per_block(difficulty, spec) / avg_block_time


def difficulty_for_hash_rate(hash_rate: float, spec: ChainSpec) -> float:
    """Inverse of :func:`network_hash_rate` at the target block time."""
    return hash_rate * spec.target_block_time / spec.hashes_per_difficulty_unit


def lower_bound_power(hash_rate: float, best_efficiency: float) -> EnergyEstimate:
    """Power if every hash were computed on the most efficient hardware."""
    if hash_rate < 0:
        raise ValueError("hash_rate must be >= 0")
    if not best_efficiency > 0:
        raise ValueError("best_efficiency must be > 0")
    return EnergyEstimate.from_power(
        hash_rate * best_efficiency,
        EstimateKind.LOWER,
        hash_rate=hash_rate,
        efficiency=best_efficiency,
    )


def upper_bound_power(sample: MarketSample, spec: ChainSpec, tariff: Tariff) -> EnergyEstimate:
    """Power at which yearly electricity spend equals yearly mining revenue."""
    if not tariff.usd_per_kwh > 0:
        raise ValueError("tariff must be > 0 USD/kWh for an upper bound")
    revenue = sample.block_reward * spec.blocks_per_year * sample.price_usd  # USD/yr
    power = revenue / tariff.usd_per_kwh * JOULES_PER_KWH / SECONDS_PER_YEAR
    return EnergyEstimate.from_power(
        power,
        EstimateKind.UPPER,
        usd_per_kwh=tariff.usd_per_kwh,
        price_usd=sample.price_usd,
        subsidy=sample.subsidy,
        fees_per_block=sample.fees_per_block,
        target_block_time=spec.target_block_time,
    )


def revenue_per_exahash(sample: MarketSample, spec: ChainSpec) -> float:
    """Expected USD earned per 1e18 hashes at the sample's difficulty."""
    hashes = expected_hashes_per_block(sample.difficulty, spec)
    return sample.block_reward * sample.price_usd / hashes * HASHES_PER_EH


def revenue_series(series: Sequence[MarketSample], spec: ChainSpec) -> list[RewardPerHashPoint]:
    return [RewardPerHashPoint(s.date, revenue_per_exahash(s, spec)) for s in series]


def relative_margin(profile: HardwareProfile, tariff: Tariff, revenue_rate: float) -> float:
    """(revenue - electricity cost) / electricity cost for one device."""
    if not tariff.usd_per_kwh > 0:
        raise ValueError("tariff must be > 0 USD/kWh")
    revenue = revenue_rate * profile.hash_rate / HASHES_PER_EH
    cost = profile.power * tariff.usd_per_kwh / JOULES_PER_KWH
    return (revenue - cost) / cost


def breakeven_tariff(profile: HardwareProfile, revenue_rate: float) -> float:
    if revenue_rate < 0:
        raise ValueError("revenue_rate must be >= 0")
    return revenue_rate * profile.hash_rate * JOULES_PER_KWH / (HASHES_PER_EH * profile.power)


def breakeven_revenue_rate(profile: HardwareProfile, tariff: Tariff) -> float:
    """USD/EH at which the device exactly covers its electricity bill."""
    return profile.efficiency * tariff.usd_per_joule * HASHES_PER_EH


def halving_fraction(fee_share: float, halvings: int | float) -> float:
    """Fraction of today's revenue left after ``halvings`` subsidy halvings.

    Fees stay constant in absolute terms. ``halvings=math.inf`` gives the floor.
    """
    if not 0 <= fee_share <= 1:
        raise ValueError("fee_share must be in [0, 1]")
    if halvings < 0:
        raise ValueError("halvings must be >= 0")
    decay = 0.0 if math.isinf(halvings) else 2.0 ** (-halvings)
    return (1.0 - fee_share) * decay + fee_share


def project_consumption(current: float, fee_share: float, halvings: int | float) -> float:
    if current < 0:
        raise ValueError("current consumption must be >= 0")
    return current * halving_fraction(fee_share, halvings)


def pearson_correlation(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two observations")
    # Shifted Welford update; stable for large offsets.
    mean_a = mean_b = 0.0
    m2a = m2b = cab = 0.0
    for k, (x, y) in enumerate(zip(a, b), start=1):
        dx = x - mean_a
        dy = y - mean_b
        mean_a += dx / k
        mean_b += dy / k
        m2a += dx * (x - mean_a)
        m2b += dy * (y - mean_b)
        cab += dx * (y - mean_b)
    if m2a <= 0 or m2b <= 0:
        raise ZeroVarianceError("correlation undefined for a zero-variance series")
    r = cab / math.sqrt(m2a * m2b)
    return max(-1.0, min(1.0, r))


class ZeroVarianceError(ValueError):
    pass


def chain_storage_growth(base_growth: float, tx_multiplier: float) -> float:
    if base_growth < 0 or tx_multiplier < 0:
        raise ValueError("growth and multiplier must be >= 0")
    return base_growth * tx_multiplier


def all_pow_consumption(bitcoin_estimate: float, factor: float) -> float:
    """Scale a Bitcoin estimate to all PoW chains; Bitcoin is part of the total."""
    if factor < 1:
        raise ValueError("factor must be >= 1 (Bitcoin is included in the total)")
    return bitcoin_estimate * factor


def with_price(sample: MarketSample, price_usd: float) -> MarketSample:
    return replace(sample, price_usd=price_usd)
