import math

import pytest
from hypothesis import given, strategies as st

from photonlimits.model import (CavityChannel, ConfigurationError, SystemParams, adiabatic_limit,
                                cooperativity, critical_time, degenerate_product_limit, derived,
                                instant_excitation_limit, separated_product_limit)

from conftest import lambda_system, zeeman_system


def test_cooperativity_and_limits():
    p = SystemParams.lambda_system(1.0, 0.5, 1.0)
    assert cooperativity(p) == pytest.approx(1.0)
    assert adiabatic_limit(p) == pytest.approx(2 / 3)
    assert instant_excitation_limit(p) == pytest.approx(4 / 9)


@pytest.mark.parametrize("ratio, t_crit", [(10, 100.0), (1, 1.0), (0.1, 1.0)])
def test_critical_time(ratio, t_crit):
    assert critical_time(lambda_system(ratio)) == pytest.approx(t_crit)


def test_instant_limits_of_the_three_regimes():
    # kappa = 10 g, gamma = g/20  /  kappa = g, gamma = g/2  /  kappa = g/10, gamma = 5 g
    assert instant_excitation_limit(SystemParams.lambda_system(10.0, 0.05, 1.0)) == pytest.approx(0.6633499170812604)
    assert instant_excitation_limit(SystemParams.lambda_system(1.0, 0.5, 1.0)) == pytest.approx(4 / 9)
    assert instant_excitation_limit(SystemParams.lambda_system(0.1, 5.0, 1.0)) == pytest.approx(0.1 / 5.1 * 2 / 3)


def test_product_limits():
    p = zeeman_system(0.0)
    assert degenerate_product_limit(p) == pytest.approx(5 / 81)
    assert separated_product_limit(p) == pytest.approx(20 / 728)


def test_invalid_parameters():
    with pytest.raises(ConfigurationError):
        CavityChannel(0.0)
    with pytest.raises(ConfigurationError):
        SystemParams(-1.0, 1.0, (CavityChannel(1.0),))
    with pytest.raises(ConfigurationError):
        SystemParams(1.0, 1.0, ())
    with pytest.raises(IndexError):
        cooperativity(lambda_system(1.0), 2)
    with pytest.raises(ConfigurationError):
        critical_time(zeeman_system(1.0))


def test_derived_bundle():
    d = derived(lambda_system(1.0))
    assert d.C == pytest.approx(1.0) and d.P_adiabatic == pytest.approx(2 / 3)
    assert derived(zeeman_system(0.0)).t_crit is None


@given(st.floats(0.1, 10), st.floats(0.01, 10), st.floats(-5, 5), st.floats(-5, 5))
def test_centering_zeroes_weighted_mean(g1, g2, d1, d2):
    p = SystemParams(1.0, 1.0, (CavityChannel(g1, d1), CavityChannel(-g2, d2))).centered()
    mean = sum(c.g ** 2 * c.delta for c in p.channels)
    assert abs(mean) < 1e-9 * (1 + abs(d1) + abs(d2)) * (g1 * g1 + g2 * g2)
    # splitting is preserved
    assert p.deltas[0] - p.deltas[1] == pytest.approx(d1 - d2, abs=1e-9)


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_adiabatic_limit_in_unit_interval(g, gamma):
    p = SystemParams.lambda_system(1.0, gamma, g)
    assert 0 < instant_excitation_limit(p) < adiabatic_limit(p) < 1
    assert math.isclose(adiabatic_limit(p), 2 * cooperativity(p) / (2 * cooperativity(p) + 1))
