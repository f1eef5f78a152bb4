"""Physical parameters and calibrated constants of the memory + converter chain.

All quantities are SI: probabilities per trial (or per detection gate),
powers in watts, times in seconds, solid angles in steradian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from scipy import constants as _sc

from .errors import DomainError, ValidationError
from .reference import value as _ref

FOUR_PI = 4.0 * math.pi

# 87Rb atomic mass in unified atomic mass units (CODATA / Steck).
RB87_MASS_U = 86.909180527

XI_G = _ref("memory", "xi_g")
P_NOISE_WRITE = _ref("memory", "p_noise_w")
P_NOISE_READ = _ref("memory", "p_noise_r")

#: Write pulse power at which the default pair probability is reached.
REFERENCE_WRITE_POWER = 0.17e-3
REFERENCE_P = 0.01


@dataclass(frozen=True)
class PhysicalConstants:
    boltzmann_k: float = _sc.k
    rb87_mass: float = RB87_MASS_U * _sc.physical_constants["atomic mass constant"][0]
    speed_of_light: float = _sc.c
    fiber_group_velocity: float = _ref("link", "fiber_group_velocity")

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{f.name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class ExperimentParams:
    """Efficiencies and probabilities entering the detection-probability model.

    ``p`` is the probability per trial of creating a spin-wave together
    with a write photon in the collected mode. ``eta_cw`` and ``eta_r`` are
    the total write- and read-arm detection efficiencies, and
    ``eta_ret_intrinsic`` the intrinsic retrieval efficiency at zero
    storage time. ``p_per_watt`` maps write-pulse peak power onto ``p``.
    """

    p: float = REFERENCE_P
    eta_cw: float = 0.01
    eta_r: float = 0.08
    eta_ret_intrinsic: float = 0.30
    xi_g: float = XI_G
    solid_angle_w: float = FOUR_PI * 1e-6
    solid_angle_r: float = FOUR_PI * 1e-6
    p_noise_w: float = P_NOISE_WRITE
    p_noise_r: float = P_NOISE_READ
    p_per_watt: float = REFERENCE_P / REFERENCE_WRITE_POWER

    @property
    def n_s(self) -> float:
        """Mean number of atoms transferred to the storage state."""
        return self.p * FOUR_PI / self.solid_angle_w

    @property
    def random_emission_probability_max(self) -> float:
        """Random (non-directional) read emission probability when fully dephased."""
        return self.n_s * self.solid_angle_r / FOUR_PI * self.xi_g

    def with_write_power(self, power: float) -> "ExperimentParams":
        return replace(self, p=p_from_write_power(power, self))


_UNIT_INTERVAL = ("eta_cw", "eta_r", "eta_ret_intrinsic", "xi_g", "p_noise_w", "p_noise_r")


def validate(params: ExperimentParams) -> list[str]:
    """Return the list of violated invariants; empty iff ``params`` is usable.

    ``p`` must lie in [0, 1): thermal pair statistics have no meaning at a
    mean occupation of one or more.
    """
    report = []
    for name in _UNIT_INTERVAL:
        value = getattr(params, name)
        if not (math.isfinite(value) and 0.0 <= value <= 1.0):
            report.append(f"{name}={value!r} outside [0, 1]")
    if not (math.isfinite(params.p) and 0.0 <= params.p < 1.0):
        report.append(f"p={params.p!r} outside [0, 1)")
    for name in ("solid_angle_w", "solid_angle_r"):
        value = getattr(params, name)
        if not (math.isfinite(value) and 0.0 < value <= FOUR_PI):
            report.append(f"{name}={value!r} outside (0, 4*pi]")
    if not (math.isfinite(params.p_per_watt) and params.p_per_watt >= 0):
        report.append(f"p_per_watt={params.p_per_watt!r} must be >= 0")
    if not report:
        rand = params.random_emission_probability_max
        if not rand <= 1.0:
            report.append(
                f"random emission probability {rand!r} exceeds 1 "
                "(solid_angle_r too large relative to solid_angle_w)"
            )
    return report


def check_params(params: ExperimentParams) -> ExperimentParams:
    """Raise :class:`ValidationError` unless ``params`` is valid."""
    report = validate(params)
    if report:
        raise ValidationError(report)
    return params


def default_paper_params() -> ExperimentParams:
    return ExperimentParams()


def p_from_write_power(power: float, params: ExperimentParams | None = None) -> float:
    """Pair probability produced by a write pulse of peak ``power`` (W)."""
    if power < 0:
        raise DomainError(f"write power must be >= 0, got {power!r}")
    kappa = (params or ExperimentParams()).p_per_watt
    return kappa * power


def write_power_from_p(p: float, params: ExperimentParams | None = None) -> float:
    kappa = (params or ExperimentParams()).p_per_watt
    if kappa <= 0:
        raise DomainError("p_per_watt must be > 0 to invert the power map")
    return p / kappa
