import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockwatt.units import (
    BITCOIN,
    ChainSpec,
    EnergyEstimate,
    EstimateKind,
    HardwareProfile,
    Tariff,
    efficiency_of,
    find_hardware,
    joules_to_kwh,
    load_catalog,
    twh_per_year_to_watts,
    watts_to_twh_per_year,
)


def test_efficiency_examples():
    assert efficiency_of(HardwareProfile("ref", 2020, 1e14, 3000)) == pytest.approx(3e-11, rel=1e-12)
    assert efficiency_of(HardwareProfile("unit", 2020, 1, 1)) == 1.0
    assert efficiency_of(HardwareProfile("s19", 2020, 1.1e14, 3250)) == pytest.approx(3250 / 1.1e14, rel=1e-12)


@pytest.mark.parametrize("hash_rate, power", [(0, 100), (100, 0), (-1, 5)])
def test_hardware_rejects_non_positive(hash_rate, power):
    with pytest.raises(ValueError):
        HardwareProfile("bad", 2020, hash_rate, power)


@given(
    h=st.floats(1e6, 1e16),
    p=st.floats(1, 1e5),
    k=st.floats(1.01, 100),
)
def test_efficiency_monotonicity(h, p, k):
    base = efficiency_of(HardwareProfile("a", 2020, h, p))
    assert efficiency_of(HardwareProfile("a", 2020, h * k, p)) < base
    assert efficiency_of(HardwareProfile("a", 2020, h, p * k)) > base


def test_twh_conversion_examples():
    assert watts_to_twh_per_year(0) == 0
    assert watts_to_twh_per_year(1e9) == pytest.approx(8.766, rel=1e-12)
    assert watts_to_twh_per_year(6.85e9) == pytest.approx(60.05, abs=0.01)


def test_negative_conversions_rejected():
    with pytest.raises(ValueError):
        watts_to_twh_per_year(-1)
    with pytest.raises(ValueError):
        joules_to_kwh(-1)


def test_joules_to_kwh():
    assert joules_to_kwh(3.6e6) == 1.0
    assert joules_to_kwh(0) == 0
    assert joules_to_kwh(1.5e9) == pytest.approx(416.67, abs=0.005)


@given(st.floats(1, 1e12))
def test_twh_round_trip(power):
    assert twh_per_year_to_watts(watts_to_twh_per_year(power)) == pytest.approx(power, rel=1e-12)


def test_energy_estimate_consistency():
    e = EnergyEstimate.from_power(1e9, EstimateKind.LOWER, efficiency=3e-11)
    assert e.annual_energy == pytest.approx(8.766, rel=1e-12)
    assert e.assumptions["efficiency"] == 3e-11
    with pytest.raises(ValueError):
        EnergyEstimate(1e9, 9.0, EstimateKind.LOWER)
    with pytest.raises(ValueError):
        EnergyEstimate.from_power(-1.0, EstimateKind.UPPER)


def test_chain_spec_defaults_and_validation():
    assert BITCOIN.target_block_time == 600
    assert BITCOIN.blocks_per_year == pytest.approx(52596)
    with pytest.raises(ValueError):
        ChainSpec("x", 0, 2016, 210000, 50)
    with pytest.raises(ValueError):
        ChainSpec("x", 600, 0, 210000, 50)
    with pytest.raises(ValueError):
        ChainSpec("x", 600, 2016, 210000, 50, retarget_clamp=0.5)


def test_tariff():
    assert Tariff(0.05).usd_per_joule == pytest.approx(0.05 / 3.6e6)
    with pytest.raises(ValueError):
        Tariff(-0.01)


def test_bundled_catalog():
    catalog = load_catalog()
    names = [hw.name for hw in catalog]
    assert {"AntminerS9", "WhatsminerM10S", "AntminerS19Pro"} <= set(names)
    s19 = find_hardware(catalog, "AntminerS19Pro")
    assert s19.hash_rate == 110e12
    in_fleet_range = [hw.name for hw in catalog if 3e-11 <= hw.efficiency <= 7e-11]
    assert {"ReferenceASIC2020", "WhatsminerM10S"} <= set(in_fleet_range)
    with pytest.raises(KeyError):
        find_hardware(catalog, "nope")
