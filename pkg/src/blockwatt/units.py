"""Shared value types and unit conversions.

Energies are carried in joules and watts throughout the package; USD and kWh
only appear at the edges (tariffs, reports).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

HOURS_PER_YEAR = 8766.0  # 365.25 d
SECONDS_PER_YEAR = HOURS_PER_YEAR * 3600.0
JOULES_PER_KWH = 3.6e6
JOULES_PER_TWH = 3.6e15
HASHES_PER_EH = 1e18
HASHES_PER_TH = 1e12


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class ChainSpec:
    """Protocol constants of a PoW chain."""

    name: str
    target_block_time: float
    retarget_epoch: int
    halving_interval: int
    initial_subsidy: float
    hashes_per_difficulty_unit: float = 2.0**32
    retarget_clamp: float = 4.0

    def __post_init__(self) -> None:
        _require(self.target_block_time > 0, "target_block_time must be > 0")
        _require(self.retarget_epoch >= 1, "retarget_epoch must be >= 1")
        _require(self.halving_interval >= 1, "halving_interval must be >= 1")
        _require(self.initial_subsidy >= 0, "initial_subsidy must be >= 0")
        _require(self.hashes_per_difficulty_unit > 0, "hashes_per_difficulty_unit must be > 0")
        _require(self.retarget_clamp >= 1, "retarget_clamp must be >= 1")

    @property
    def blocks_per_year(self) -> float:
        return SECONDS_PER_YEAR / self.target_block_time


BITCOIN = ChainSpec(
    name="bitcoin",
    target_block_time=600.0,
    retarget_epoch=2016,
    halving_interval=210_000,
    initial_subsidy=50.0,
)


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    launch_year: int
    hash_rate: float  # H/s
    power: float  # W

    def __post_init__(self) -> None:
        _require(self.hash_rate > 0 and math.isfinite(self.hash_rate), f"{self.name}: hash_rate must be > 0")
        _require(self.power > 0 and math.isfinite(self.power), f"{self.name}: power must be > 0")

    @property
    def efficiency(self) -> float:
        """Energy per hash in J/H."""
        return self.power / self.hash_rate


@dataclass(frozen=True)
class Tariff:
    usd_per_kwh: float

    def __post_init__(self) -> None:
        _require(self.usd_per_kwh >= 0, "tariff must be >= 0 USD/kWh")

    @property
    def usd_per_joule(self) -> float:
        return self.usd_per_kwh / JOULES_PER_KWH


class EstimateKind(str, Enum):
    LOWER = "lower"
    UPPER = "upper"
    BEST_GUESS = "best_guess"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class EnergyEstimate:
    """A sustained power figure and its annualized energy.

    Build it from watts with :meth:`from_power`; ``annual_energy`` is then
    consistent with ``power`` by construction.
    """

    power: float  # W
    annual_energy: float  # TWh/yr
    kind: EstimateKind
    assumptions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require(self.power >= 0, "power must be >= 0")
        expected = watts_to_twh_per_year(self.power)
        _require(
            math.isclose(self.annual_energy, expected, rel_tol=1e-12, abs_tol=0.0),
            "annual_energy inconsistent with power",
        )

    @classmethod
    def from_power(cls, power: float, kind: EstimateKind | str, **assumptions: float) -> "EnergyEstimate":
        return cls(power, watts_to_twh_per_year(power), EstimateKind(kind), dict(assumptions))


def efficiency_of(profile: HardwareProfile) -> float:
    return profile.power / profile.hash_rate


def watts_to_twh_per_year(power: float) -> float:
    if power < 0:
        raise ValueError(f"power must be >= 0, got {power}")
    return power * HOURS_PER_YEAR / 1e12


def twh_per_year_to_watts(energy: float) -> float:
    if energy < 0:
        raise ValueError(f"energy must be >= 0, got {energy}")
    return energy * 1e12 / HOURS_PER_YEAR


def joules_to_kwh(e: float) -> float:
    if e < 0:
        raise ValueError(f"energy must be >= 0, got {e}")
    return e / JOULES_PER_KWH


DATA_DIR = Path(__file__).parent / "data"


def load_catalog(path: str | Path | None = None) -> list[HardwareProfile]:
    """Hardware catalog; the bundled one unless ``path`` is given."""
    from blockwatt.ingest import load_hardware_csv

    return load_hardware_csv(path or DATA_DIR / "hardware.csv")


def find_hardware(catalog: list[HardwareProfile], name: str) -> HardwareProfile:
    for hw in catalog:
        if hw.name == name:
            return hw
    raise KeyError(name)
