"""Energy models for distributed ledgers: PoW bounds, mining economics,
halving projections, a miner-market simulator and per-transaction
comparisons of non-PoW architectures."""

from blockwatt.units import (
    BITCOIN,
    ChainSpec,
    EnergyEstimate,
    HardwareProfile,
    Tariff,
    efficiency_of,
    joules_to_kwh,
    load_catalog,
    twh_per_year_to_watts,
    watts_to_twh_per_year,
)

__version__ = "0.1.0"

__all__ = [
    "BITCOIN",
    "ChainSpec",
    "EnergyEstimate",
    "HardwareProfile",
    "Tariff",
    "efficiency_of",
    "joules_to_kwh",
    "load_catalog",
    "twh_per_year_to_watts",
    "watts_to_twh_per_year",
]
