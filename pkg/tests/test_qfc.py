import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dlczqfc.errors import ClampWarning, DomainError, NoCrossoverError
from dlczqfc.qfc import (
    CALIBRATION_PUMP_POWER,
    SNR_MAX,
    ConversionDevice,
    FilterChain,
    chain_extinction,
    compose_g2_with_noise,
    crossover_distance,
    default_filter_chain,
    equivalent_fiber_length,
    eta_device,
    eta_internal,
    lossless,
    noise_probability,
    snr,
    storage_to_fiber_length,
)

# frozen values of the default device
P_OPT = 0.44943553739022574
ETA_INT_CAL = 0.6506541681618994
NOISE_COEFF = 1718.8895647513807
P_NOISE_OPERATING = 2.0339118951116016e-05


def test_loss_chain(device):
    assert device.eta_loss == pytest.approx(0.74 * 0.36 * 0.70 * 0.75)


def test_optimum(device):
    assert device.optimal_pump == pytest.approx(P_OPT, rel=1e-12)
    assert eta_internal(device.optimal_pump, device) == pytest.approx(0.72, rel=1e-12)
    assert eta_device(device.optimal_pump, device) == pytest.approx(0.72 * device.eta_loss, rel=1e-12)


def test_efficiency_at_calibration_pump(device):
    assert eta_internal(0.287, device) == pytest.approx(ETA_INT_CAL, rel=1e-12)


def test_no_pump_no_conversion(device):
    assert eta_internal(0.0, device) == 0.0


def test_efficiency_periodic_and_bounded(device):
    P = np.linspace(0, 10, 2001)
    eta = eta_internal(P, device)
    assert np.all(eta >= 0) and np.all(eta <= device.eta_int_max)
    assert eta_internal(4 * device.optimal_pump, device) == pytest.approx(0.0, abs=1e-12)


def test_negative_pump_rejected(device):
    with pytest.raises(DomainError):
        eta_internal(-0.1, device)


def test_noise_calibration(device):
    assert device.noise_coeff == pytest.approx(NOISE_COEFF, rel=1e-12)
    assert isinstance(device.noise_coeff, float)
    assert noise_probability(0.29, device) == pytest.approx(P_NOISE_OPERATING, rel=1e-12)


def test_snr_anchor(device):
    assert snr(1.0, CALIBRATION_PUMP_POWER, device) == pytest.approx(SNR_MAX, rel=1e-12)
    assert SNR_MAX == 452.0


@given(st.floats(1e-200, 100.0) | st.just(0.0))
def test_snr_linear_in_mu(mu):
    dev = ConversionDevice()
    assert snr(mu, 0.3, dev) == pytest.approx(mu * snr(1.0, 0.3, dev), rel=1e-15, abs=0)


def test_snr_without_noise(device):
    quiet = replace(device, noise_coeff=0.0, dark_rate=0.0)
    assert snr(1.0, 0.3, quiet) == math.inf
    with pytest.raises(DomainError):
        snr(0.0, 0.3, quiet)


def test_noise_clamped_with_warning(device):
    loud = replace(device, noise_coeff=1e12)
    with pytest.warns(ClampWarning):
        assert noise_probability(1.0, loud) == 1.0


def test_unreachable_calibration():
    with pytest.raises(DomainError):
        ConversionDevice(dark_rate=1e9)


def test_lossless_device(device):
    assert lossless(device).eta_loss == 1.0
    assert lossless(device).noise_coeff == device.noise_coeff


def test_chain_extinction():
    ext = chain_extinction(default_filter_chain())
    assert ext.extinction_db == 155.0 and ext.extinction_db > 150
    assert ext.transmission == pytest.approx(0.36)


@given(st.permutations([("a", 100.0, 0.9), ("b", 44.0, 0.8), ("c", 11.0, 0.5)]))
def test_chain_extinction_order_independent(items):
    assert chain_extinction(FilterChain.from_tuples(items)) == chain_extinction(default_filter_chain())


def test_empty_chain():
    with pytest.raises(DomainError):
        chain_extinction(FilterChain())


def test_compose_fixed_point_and_limit():
    assert compose_g2_with_noise(1.0, 3.0) == pytest.approx(1.0)
    assert abs(compose_g2_with_noise(20.0, 1e9) - 20.0) < 1e-7
    assert compose_g2_with_noise(20.0, math.inf) == 20.0
    with pytest.raises(DomainError):
        compose_g2_with_noise(2.0, 0.0)


def test_compose_vectorized():
    out = compose_g2_with_noise(np.array([1.0, 10.0]), np.array([1.0, 1.0]))
    assert out == pytest.approx([1.0, 5.5])


def test_link_budget():
    assert equivalent_fiber_length(0.10) == pytest.approx(50.0)
    assert equivalent_fiber_length(0.50) == pytest.approx(15.0515, rel=1e-5)
    assert crossover_distance(0.10) == pytest.approx(10 / 3.3)
    assert crossover_distance(0.10, 3.5, 0.2) == pytest.approx(3.0303, rel=1e-4)
    assert storage_to_fiber_length(40e-6) == pytest.approx(8.0)
    assert storage_to_fiber_length(23.6e-6) == pytest.approx(4.72)
    assert equivalent_fiber_length(1.0) == 0.0


def test_link_budget_errors():
    with pytest.raises(NoCrossoverError):
        crossover_distance(0.1, 0.2, 0.2)
    with pytest.raises(DomainError):
        equivalent_fiber_length(0.0)
    with pytest.raises(DomainError):
        storage_to_fiber_length(-1.0)
