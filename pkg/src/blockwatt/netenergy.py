"""Per-transaction energy of transaction processing.

Redundant execution across nodes, zk-rollup compression with a prover
addend, idle-power amortization, PoW per-transaction figures and the
cross-architecture comparison table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from blockwatt.units import twh_per_year_to_watts


@dataclass(frozen=True)
class NetworkProfile:
    name: str
    node_count: int
    energy_per_tx_per_node: float  # J
    throughput: float  # tx/s
    idle_power_per_node: float = 0.0  # W
    consensus_overhead_per_tx: float = 0.0  # J

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise ValueError(f"{self.name}: node_count must be >= 1")
        if not self.throughput > 0:
            raise ValueError(f"{self.name}: throughput must be > 0")
        for attr in ("energy_per_tx_per_node", "idle_power_per_node", "consensus_overhead_per_tx"):
            if not getattr(self, attr) >= 0:
                raise ValueError(f"{self.name}: {attr} must be >= 0")


@dataclass(frozen=True)
class RollupParams:
    gas_simple_tx: float
    gas_rollup_tx: float
    prover_power: float  # W
    rollup_throughput: float  # tx/s

    def __post_init__(self) -> None:
        if not self.gas_simple_tx >= self.gas_rollup_tx > 0:
            raise ValueError("need gas_simple_tx >= gas_rollup_tx > 0")
        if not self.prover_power >= 0:
            raise ValueError("prover_power must be >= 0")
        if not self.rollup_throughput > 0:
            raise ValueError("rollup_throughput must be > 0")


# Loopring 3 at full utilisation vs. the minimum gas of a plain transfer.
LOOPRING_GAS_PER_TX = 365.0
SIMPLE_TX_MIN_GAS = 21_000.0
LOOPRING_MAX_TPS = 2_100.0

# Named compression presets: the pure gas ratio, and the rounded figure
# that accounts for typical transfers costing more than the minimum.
GAS_RATIO_FACTOR = SIMPLE_TX_MIN_GAS / LOOPRING_GAS_PER_TX
ROUNDED_FACTOR = 100.0

PER_NODE_TX_ENERGY_J = 0.01  # measured on a non-PoW Ethereum client, CPU only
LARGE_NETWORK_NODES = 10_000

VISA_TOTAL_J_PER_TX = 6_000.0
VISA_DATACENTER_J_PER_TX = 3_000.0


def redundant_energy_per_tx(profile: NetworkProfile) -> float:
    return profile.node_count * profile.energy_per_tx_per_node + profile.consensus_overhead_per_tx


def gas_reduction_factor(params: RollupParams) -> float:
    return params.gas_simple_tx / params.gas_rollup_tx


def prover_energy_per_tx(params: RollupParams) -> float:
    return params.prover_power / params.rollup_throughput


def rollup_energy_per_tx(base: float, factor: float, prover: float) -> float:
    if factor < 1:
        raise ValueError("compression factor must be >= 1")
    return base / factor + prover


def savings_fraction(before: float, after: float) -> float:
    """Relative saving; negative when ``after`` exceeds ``before``."""
    if before == 0:
        raise ValueError("baseline energy must be non-zero")
    if before < 0:
        raise ValueError("baseline energy must be positive")
    return 1.0 - after / before


def idle_adjusted_energy_per_tx(per_tx: float, profile: NetworkProfile) -> float:
    return per_tx + profile.node_count * profile.idle_power_per_node / profile.throughput


def pow_energy_per_tx(network_power: float, throughput: float) -> float:
    """Network power divided by throughput, J/tx.

    Mining power does not depend on the number of transactions, so this is an
    attribution, not a marginal cost.
    """
    if not throughput > 0:
        raise ValueError("throughput must be > 0")
    if network_power < 0:
        raise ValueError("network_power must be >= 0")
    return network_power / throughput


class ReportRow(NamedTuple):
    name: str
    energy_per_tx: float  # J
    order_of_magnitude: int


@dataclass(frozen=True)
class ArchitectureReport:
    rows: tuple[ReportRow, ...]

    def __post_init__(self) -> None:
        energies = [r.energy_per_tx for r in self.rows]
        if energies != sorted(energies, reverse=True):
            raise ValueError("rows must be sorted by descending energy_per_tx")

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.rows]


def _magnitude(x: float) -> int:
    if x <= 0:
        raise ValueError("energy_per_tx must be > 0 to place on a log scale")
    m = math.floor(math.log10(x))
    # log10 can land just below an exact power of ten
    if 10.0 ** (m + 1) <= x:
        m += 1
    return m


def compare_architectures(configs: Iterable[NetworkProfile | tuple[str, float]]) -> ArchitectureReport:
    """Rank configurations by energy per transaction, highest first.

    Each entry is a :class:`NetworkProfile` (resolved through
    :func:`redundant_energy_per_tx`) or a precomputed ``(name, J/tx)`` pair.
    Ties keep input order.
    """
    resolved: list[tuple[str, float]] = []
    for c in configs:
        if isinstance(c, NetworkProfile):
            resolved.append((c.name, redundant_energy_per_tx(c)))
        else:
            name, value = c
            resolved.append((name, float(value)))
    if not resolved:
        raise ValueError("nothing to compare")
    resolved.sort(key=lambda nv: -nv[1])
    return ArchitectureReport(tuple(ReportRow(n, v, _magnitude(v)) for n, v in resolved))


def rollup_profile(base: NetworkProfile, factor: float, prover_j_per_tx: float, name: str | None = None) -> NetworkProfile:
    """Express a rollup-enabled network as a plain profile.

    Per-node work shrinks by ``factor``; the prover's energy is a fixed
    per-transaction addend on top of any existing consensus overhead.
    """
    if factor < 1:
        raise ValueError("compression factor must be >= 1")
    return NetworkProfile(
        name=name or f"{base.name} + rollup",
        node_count=base.node_count,
        energy_per_tx_per_node=base.energy_per_tx_per_node / factor,
        throughput=base.throughput,
        idle_power_per_node=base.idle_power_per_node,
        consensus_overhead_per_tx=base.consensus_overhead_per_tx + prover_j_per_tx,
    )


def pow_profile(name: str, annual_twh: float, throughput: float) -> NetworkProfile:
    """A PoW chain as a profile whose whole cost is consensus overhead."""
    return NetworkProfile(
        name=name,
        node_count=1,
        energy_per_tx_per_node=0.0,
        throughput=throughput,
        consensus_overhead_per_tx=pow_energy_per_tx(twh_per_year_to_watts(annual_twh), throughput),
    )


def default_profiles() -> list[NetworkProfile]:
    """The five-way comparison: PoW, large non-PoW network with and without a
    rollup, a 10-node permissioned network and a central key-value store."""
    large = NetworkProfile("large non-PoW network", LARGE_NETWORK_NODES, PER_NODE_TX_ENERGY_J, LOOPRING_MAX_TPS)
    return [
        pow_profile("PoW Bitcoin", 100.0, 4.2),
        large,
        rollup_profile(large, ROUNDED_FACTOR, 0.5, name="large network + zk-rollup"),
        NetworkProfile("10-node permissioned", 10, 0.1, 1000.0),
        NetworkProfile("central key-value store", 1, 0.02, 5000.0),
    ]


def visa_rows() -> list[tuple[str, float]]:
    return [("VISA (company total)", VISA_TOTAL_J_PER_TX), ("VISA (data centres)", VISA_DATACENTER_J_PER_TX)]
