"""Independent reference implementations used by the tests."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from blockwatt.units import HASHES_PER_EH


def pearson_exact(a, b) -> float:
    """Two-pass Pearson coefficient in exact rational arithmetic."""
    fa = [Fraction(x) for x in a]
    fb = [Fraction(y) for y in b]
    n = len(fa)
    ma = sum(fa) / n
    mb = sum(fb) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(fa, fb))
    va = sum((x - ma) ** 2 for x in fa)
    vb = sum((y - mb) ** 2 for y in fb)
    r2 = cov * cov / (va * vb)
    return math.copysign(math.sqrt(float(r2)), float(cov))


def stable_sets(cohorts, reward_usd_per_block: float, target_block_time: float):
    """All activation subsets that no single cohort wants to leave or join.

    Members break even or better at the joint hash rate; every outsider would
    lose money at the joint hash rate plus its own capacity.
    """

    def rate(h):
        return reward_usd_per_block * HASHES_PER_EH / (h * target_block_time) if h > 0 else math.inf

    found = []
    for bits in itertools.product((False, True), repeat=len(cohorts)):
        members = [c for c, on in zip(cohorts, bits) if on]
        total = sum(c.capacity for c in members)
        if members and any(c.margin(rate(total)) < 0 for c in members):
            continue
        outsiders = [c for c, on in zip(cohorts, bits) if not on]
        if any(c.margin(rate(total + c.capacity)) >= 0 for c in outsiders):
            continue
        found.append(frozenset(c.id for c in members))
    return found


def preferred_equilibrium(cohorts, reward_usd_per_block: float, target_block_time: float, order) -> frozenset:
    """The stable set that is lexicographically greatest when read in ``order``."""
    sets = stable_sets(cohorts, reward_usd_per_block, target_block_time)
    return max(sets, key=lambda s: tuple(c.id in s for c in order))
