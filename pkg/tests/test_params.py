import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from dlczqfc.errors import DomainError, ValidationError
from dlczqfc.params import (
    FOUR_PI,
    ExperimentParams,
    PhysicalConstants,
    check_params,
    p_from_write_power,
    validate,
    write_power_from_p,
)


def test_defaults_are_valid(params):
    assert validate(params) == []
    assert check_params(params) is params


def test_reference_power_maps_to_one_percent():
    assert p_from_write_power(0.17e-3) == pytest.approx(0.01, rel=1e-12)


@given(st.floats(0, 1e-2))
def test_power_map_round_trip(power):
    p = p_from_write_power(power)
    assert write_power_from_p(p) == pytest.approx(power, rel=1e-12, abs=1e-300)


def test_negative_power_rejected():
    with pytest.raises(DomainError):
        p_from_write_power(-1e-3)


def test_zero_gain_cannot_be_inverted():
    with pytest.raises(DomainError):
        write_power_from_p(0.01, ExperimentParams(p_per_watt=0.0))


@pytest.mark.parametrize("field,value", [
    ("eta_cw", 1.5), ("eta_r", -0.1), ("eta_ret_intrinsic", math.nan), ("xi_g", 2.0),
    ("p", 1.0), ("p", -0.01), ("solid_angle_w", 0.0), ("solid_angle_r", 5 * math.pi),
    ("p_per_watt", -1.0), ("p_noise_w", 1.1),
])
def test_invariant_violations_reported(params, field, value):
    bad = replace(params, **{field: value})
    report = validate(bad)
    assert report and any(field in line for line in report)
    with pytest.raises(ValidationError) as exc:
        check_params(bad)
    assert exc.value.violations == report


def test_random_emission_over_one_is_invalid(params):
    bad = replace(params, p=0.5, solid_angle_w=FOUR_PI * 1e-6, solid_angle_r=FOUR_PI * 1e-2, xi_g=1.0)
    assert any("random emission" in line for line in validate(bad))


def test_several_violations_listed_together(params):
    report = validate(replace(params, eta_cw=2.0, eta_r=3.0))
    assert len(report) == 2


def test_number_of_atoms_in_storage_state(params):
    # p * 4 pi / dOmega_w with dOmega_w = 4 pi * 1e-6
    assert params.n_s == pytest.approx(params.p * 1e6)


def test_constants_positive():
    with pytest.raises(DomainError):
        PhysicalConstants(boltzmann_k=0.0)


def test_with_write_power(params):
    assert params.with_write_power(0.65e-3).p == pytest.approx(0.65 / 0.17 * 0.01)
