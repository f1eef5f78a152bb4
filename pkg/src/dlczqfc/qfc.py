"""Frequency-conversion device: efficiency, filtering, pump noise and link budgets."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ClampWarning, DomainError, NoCrossoverError
from .reference import value as _ref

#: Single-photon-input SNR measured at the calibration pump power.
SNR_MAX = _ref("converter", "snr_max")
CALIBRATION_PUMP_POWER = _ref("converter", "calibration_pump")
#: Pump power used when the converter is combined with the memory.
OPERATING_PUMP_POWER = _ref("converter", "operating_pump")
#: Spectral extent of pump Raman noise (cm^-1); recorded, not modeled.
RAMAN_WINDOW_CM = 700.0

FIBER_LOSS_TELECOM = _ref("link", "fiber_loss_telecom_db_km")
FIBER_LOSS_NIR = _ref("link", "fiber_loss_nir_db_km")


@dataclass(frozen=True)
class ConversionDevice:
    """Waveguide converter with its passive loss chain and noise calibration.

    ``eta_n`` is in 1/(W cm^2) and ``length`` in cm so that
    ``length * sqrt(eta_n * P)`` is a phase in radians for ``P`` in watts.
    When ``noise_coeff`` is omitted it is calibrated so that a one-photon
    input at ``calibration_pump`` reaches ``calibration_snr``.
    """

    eta_n: float = _ref("converter", "eta_n_per_w_cm2")
    length: float = _ref("converter", "length_cm")
    eta_int_max: float = _ref("converter", "eta_int_max")
    eta_cpl: float = _ref("converter", "eta_cpl")
    eta_filter: float = _ref("converter", "eta_filter")
    eta_surf: float = _ref("converter", "eta_surf")
    eta_fiber: float = _ref("converter", "eta_fiber")
    noise_coeff: float | None = None
    dark_rate: float = _ref("converter", "dark_rate")
    detector_eff: float = _ref("converter", "detector_eff_1552")
    gate: float = _ref("converter", "gate")
    calibration_snr: float = SNR_MAX
    calibration_pump: float = CALIBRATION_PUMP_POWER

    def __post_init__(self):
        for name in ("eta_int_max", "eta_cpl", "eta_filter", "eta_surf", "eta_fiber", "detector_eff"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name}={value!r} outside [0, 1]")
        for name in ("eta_n", "length", "gate"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if self.dark_rate < 0:
            raise DomainError("dark_rate must be >= 0")
        if self.noise_coeff is None:
            object.__setattr__(self, "noise_coeff", calibrated_noise_coeff(self))
        elif self.noise_coeff < 0:
            raise DomainError("noise_coeff must be >= 0")

    @property
    def eta_loss(self) -> float:
        return self.eta_cpl * self.eta_filter * self.eta_surf * self.eta_fiber

    @property
    def optimal_pump(self) -> float:
        """Pump power (W) of the first conversion maximum."""
        return (math.pi / (2 * self.length)) ** 2 / self.eta_n


def _check_power(P):
    P = np.asarray(P, dtype=float)
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise DomainError("pump power must be finite and >= 0")
    return P


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _sin2_efficiency(P, eta_n, length, eta_max):
    return eta_max * np.sin(length * np.sqrt(eta_n * P)) ** 2


def eta_internal(P_pump, dev: ConversionDevice):
    """Internal conversion efficiency ``eta_max sin^2(L sqrt(eta_n P))``."""
    P = _check_power(P_pump)
    return _out(np.minimum(_sin2_efficiency(P, dev.eta_n, dev.length, dev.eta_int_max), dev.eta_int_max))


def eta_device(P_pump, dev: ConversionDevice):
    return _out(np.asarray(eta_internal(P_pump, dev)) * dev.eta_loss)


def _clamp_probability(p, what):
    arr = np.asarray(p, dtype=float)
    if np.any(arr > 1.0) or np.any(arr < 0.0):
        warnings.warn(f"{what} clamped into [0, 1]", ClampWarning, stacklevel=3)
        arr = np.clip(arr, 0.0, 1.0)
    return _out(arr)


def noise_probability(P_pump, dev: ConversionDevice):
    """Noise click probability per detection gate at pump power ``P_pump``."""
    P = _check_power(P_pump)
    return _clamp_probability((dev.noise_coeff * P + dev.dark_rate) * dev.gate, "noise probability")


def calibrated_noise_coeff(dev: ConversionDevice) -> float:
    """Raman noise rate per watt reproducing ``dev.calibration_snr``.

    Solves ``eta_dev(P) eta_d / ((c P + DC) gate) = SNR`` for ``c`` at
    ``P = dev.calibration_pump`` with a one-photon input.
    """
    P = dev.calibration_pump
    signal = _sin2_efficiency(P, dev.eta_n, dev.length, dev.eta_int_max) * dev.eta_loss * dev.detector_eff
    rate = signal / (dev.calibration_snr * dev.gate)
    coeff = (rate - dev.dark_rate) / P
    if coeff < 0:
        raise DomainError("calibration SNR unreachable: dark counts alone exceed the allowed noise")
    return float(coeff)


def snr(mu_in, P_pump, dev: ConversionDevice):
    """Detection-referred signal-to-noise ratio for a mean input photon number ``mu_in``.

    Returns ``inf`` when there is signal but no noise at all.
    """
    mu = np.asarray(mu_in, dtype=float)
    if np.any(mu < 0):
        raise DomainError("mu_in must be >= 0")
    signal = mu * np.asarray(eta_device(P_pump, dev)) * dev.detector_eff
    noise = np.asarray(noise_probability(P_pump, dev))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(noise > 0, signal / np.where(noise > 0, noise, 1.0), np.where(signal > 0, np.inf, np.nan))
    if np.any(np.isnan(out)):
        raise DomainError("no signal and no noise: SNR undefined")
    return _out(out)


def compose_g2_with_noise(g2_wr, snr_value):
    """Cross-correlation after mixing the heralding arm with uncorrelated noise.

    ``(g2_wr + 1/SNR) / (1 + 1/SNR)``; ``snr_value`` may be ``inf``.
    """
    g2 = np.asarray(g2_wr, dtype=float)
    s = np.asarray(snr_value, dtype=float)
    if np.any(g2 < 0):
        raise DomainError("g2_wr must be >= 0")
    if np.any(~(s > 0)):
        raise DomainError("SNR must be > 0")
    inv = 1.0 / s
    return _out((g2 + inv) / (1.0 + inv))


@dataclass(frozen=True)
class FilterElement:
    name: str
    extinction_db: float
    transmission: float

    def __post_init__(self):
        if self.extinction_db < 0:
            raise DomainError(f"{self.name}: extinction must be >= 0 dB")
        if not 0 < self.transmission <= 1:
            raise DomainError(f"{self.name}: transmission must lie in (0, 1]")


@dataclass(frozen=True)
class FilterChain:
    elements: tuple[FilterElement, ...] = field(default_factory=tuple)

    @classmethod
    def from_tuples(cls, items: Sequence[tuple[str, float, float]]) -> "FilterChain":
        return cls(tuple(FilterElement(*item) for item in items))


def default_filter_chain() -> FilterChain:
    """Pump-blocking stages behind the waveguide.

    Extinctions are the quoted values; the per-element signal transmissions
    are an assumed split whose product is the quoted 36 % filter transmission.
    """
    return FilterChain.from_tuples([
        ("bandpass pair", _ref("converter", "extinction_bandpass_db"), 0.90),
        ("fiber Bragg grating", _ref("converter", "extinction_fbg_db"), 0.80),
        ("etalon", _ref("converter", "extinction_etalon_db"), 0.50),
    ])


class ChainExtinction(NamedTuple):
    extinction_db: float
    transmission: float


def chain_extinction(chain: FilterChain) -> ChainExtinction:
    if not chain.elements:
        raise DomainError("filter chain is empty")
    # fsum keeps the result independent of element order
    total = math.fsum(e.extinction_db for e in chain.elements)
    transmission = math.prod(sorted(e.transmission for e in chain.elements))
    return ChainExtinction(total, transmission)


def equivalent_fiber_length(eta_dev: float, atten_telecom: float = FIBER_LOSS_TELECOM) -> float:
    """Telecom fiber length (km) with the same loss as the converter."""
    if not 0 < eta_dev <= 1:
        raise DomainError(f"eta_dev must lie in (0, 1], got {eta_dev!r}")
    if not atten_telecom > 0:
        raise DomainError("attenuation must be > 0")
    return -10.0 * math.log10(eta_dev) / atten_telecom


def crossover_distance(eta_dev: float, atten_near: float = FIBER_LOSS_NIR,
                       atten_telecom: float = FIBER_LOSS_TELECOM) -> float:
    """Distance (km) beyond which converting to telecom loses less than not converting."""
    if not 0 < eta_dev <= 1:
        raise DomainError(f"eta_dev must lie in (0, 1], got {eta_dev!r}")
    if not atten_telecom > 0:
        raise DomainError("attenuation must be > 0")
    if atten_near <= atten_telecom:
        raise NoCrossoverError(
            f"near-infrared loss {atten_near} dB/km does not exceed telecom loss {atten_telecom} dB/km"
        )
    return -10.0 * math.log10(eta_dev) / (atten_near - atten_telecom)


def storage_to_fiber_length(t: float, v_group: float = _ref("link", "fiber_group_velocity")) -> float:
    """Fiber distance (km) light covers during storage time ``t``."""
    if t < 0:
        raise DomainError("storage time must be >= 0")
    if not v_group > 0:
        raise DomainError("group velocity must be > 0")
    return v_group * t / 1e3


def lossless(dev: ConversionDevice) -> ConversionDevice:
    """Same device with every passive loss factor set to one."""
    return replace(dev, eta_cpl=1.0, eta_filter=1.0, eta_surf=1.0, eta_fiber=1.0, noise_coeff=dev.noise_coeff)
