import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opencavity.boundary_conditions import (BENCHMARK_COMBOS, BETA1, BETA2, BETA_ZERO, BcCombo, BetaSpec, beta1,
                                            beta2, heat_flux_integrand, negative_part)


def test_beta1_examples():
    assert beta1(0.0) == 0.5
    assert abs(beta1(0.01) - 0.25) < 1e-15


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_beta1_symmetry(s):
    assert abs(beta1(s) + beta1(-s) - 1.0) < 1e-15


def test_beta1_range_and_monotone():
    s = np.linspace(-10, 10, 10_000)
    b = beta1(s)
    assert np.all((b > 0) & (b < 1))
    assert np.all(np.diff(b) < 0)


def test_beta2_values():
    assert beta2(-1.0) == 0.5
    assert beta2(0.0) == 0.0
    assert beta2(3.7) == 0.0
    assert np.array_equal(beta2(np.array([-2.0, 0.0, 2.0])), [0.5, 0.0, 0.0])


def test_bounds():
    s = np.linspace(-50, 50, 2001)
    assert np.abs(BETA1(s)).max() <= BETA1.bound == 1.0
    assert np.abs(BETA2(s)).max() <= BETA2.bound == 0.5


def test_custom_beta_bound_checked():
    ok = BetaSpec.custom(lambda s: 0.3 * np.tanh(s), bound=0.3)
    assert ok(1.0) == pytest.approx(0.3 * math.tanh(1.0))
    with pytest.raises(ValueError):
        BetaSpec.custom(lambda s: 2.0 * np.tanh(s), bound=1.0)


def test_heat_flux_examples():
    assert heat_flux_integrand(5.0, 0.0, BETA1) == 0.0
    one = BetaSpec.custom(lambda s: np.ones_like(np.asarray(s, float)), bound=1.0)
    assert heat_flux_integrand(1.0, 2.0, one) == 2.0
    assert heat_flux_integrand(3.0, -2.0, BETA2) == -3.0
    assert heat_flux_integrand(3.0, -2.0, BETA_ZERO) == 0.0


def test_negative_part():
    assert np.array_equal(negative_part(np.array([-2.0, 0.0, 3.0])), [-2.0, 0.0, 0.0])


def test_six_benchmark_combos():
    labels = [c.label for c in BENCHMARK_COMBOS]
    assert labels == ["DN-N", "DDN-N", "DN-N_beta1", "DDN-N_beta1", "DN-N_beta2", "DDN-N_beta2"]
    assert BcCombo("dn", "n").beta is None
    assert BcCombo("ddn", "n_beta2").beta is BETA2


def test_parse_combo():
    assert BcCombo.parse("ddn-n_beta1") == BcCombo("ddn", "n_beta1")
    with pytest.raises(ValueError):
        BcCombo.parse("xx-n")
    with pytest.raises(ValueError):
        BcCombo("dn", "robin")
