"""Analytic model of the DLCZ source and of spin-wave motional dephasing.

The read-arm detection probability has a directional part, set by the
intrinsic retrieval efficiency, and a random-emission part from atoms left
in the storage state once the spin-wave has dephased::

    p_cw    = p eta_cw
    p_r     = p eta_I(t) eta_r + N_s [1 - eta_I(t)] (dOmega_r / 4 pi) xi_g eta_r
    p_cw,r  = p eta_I(t) eta_cw eta_r + p eta_cw N_s [1 - eta_I(t)] (dOmega_r / 4 pi) xi_g eta_r

with ``eta_I(t) = eta_I(0) exp(-t**2 / tau**2)``. Noise is not part of these
expressions; see :mod:`dlczqfc.qfc` and :mod:`dlczqfc.sim` for that.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .params import (
    FOUR_PI,
    ExperimentParams,
    PhysicalConstants,
    check_params,
    default_paper_params,
    p_from_write_power,
)
from .reference import value as _ref
from .rng import stream

_CONSTANTS = PhysicalConstants()

#: Fitted 1/e decay time of the retrieval efficiency.
MEASURED_TAU = _ref("memory", "tau_retrieval")
#: Write pulse and write photon wavelength, and their angular separation.
WRITE_WAVELENGTH = _ref("memory", "write_wavelength")
DETECTION_ANGLE = math.radians(_ref("memory", "detection_angle_deg"))


def delta_k_from_geometry(lambda_W: float, lambda_w: float, angle: float) -> float:
    """Magnitude of the wave-vector difference between write pulse and write photon.

    Parameters
    ----------
    lambda_W, lambda_w : float
        Wavelengths (m) of the write pulse and of the detected write photon.
    angle : float
        Angle (rad) between the two wave vectors, in [0, pi].
    """
    if not (lambda_W > 0 and lambda_w > 0):
        raise DomainError("wavelengths must be > 0")
    if not 0.0 <= angle <= math.pi:
        raise DomainError(f"angle must lie in [0, pi], got {angle!r}")
    k_W = 2 * math.pi / lambda_W
    k_w = 2 * math.pi / lambda_w
    # 2 k_W k_w (1 - cos) written with sin^2 to keep small angles accurate
    return math.sqrt((k_W - k_w) ** 2 + 4 * k_W * k_w * math.sin(angle / 2) ** 2)


def coherence_time(m: float, T: float, delta_k: float, boltzmann_k: float = _CONSTANTS.boltzmann_k) -> float:
    """Motional dephasing time ``sqrt(m / (k_B T delta_k**2))``."""
    if not (m > 0 and T > 0 and delta_k > 0):
        raise DomainError("mass, temperature and delta_k must all be > 0")
    return math.sqrt(m / (boltzmann_k * T)) / delta_k


def temperature_from_tau(m: float, tau: float, delta_k: float, boltzmann_k: float = _CONSTANTS.boltzmann_k) -> float:
    """Invert :func:`coherence_time` for the cloud temperature."""
    if not (m > 0 and tau > 0 and delta_k > 0):
        raise DomainError("mass, tau and delta_k must all be > 0")
    return m / (boltzmann_k * (tau * delta_k) ** 2)


@dataclass(frozen=True)
class DephasingModel:
    """Thermal-motion dephasing of the stored spin-wave.

    ``tau`` is derived on construction and never set directly.
    """

    atomic_mass: float
    temperature: float
    delta_k: float
    boltzmann_k: float = _CONSTANTS.boltzmann_k
    tau: float = field(init=False)

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be > 0, got {self.temperature!r}")
        if not self.delta_k > 0:
            raise DomainError(f"delta_k must be > 0, got {self.delta_k!r}")
        object.__setattr__(
            self, "tau", coherence_time(self.atomic_mass, self.temperature, self.delta_k, self.boltzmann_k)
        )

    @classmethod
    def from_tau(cls, tau: float, delta_k: float | None = None,
                 atomic_mass: float = _CONSTANTS.rb87_mass) -> "DephasingModel":
        if delta_k is None:
            delta_k = default_delta_k()
        T = temperature_from_tau(atomic_mass, tau, delta_k)
        return cls(atomic_mass=atomic_mass, temperature=T, delta_k=delta_k)

    @property
    def velocity_sigma(self) -> float:
        """Standard deviation of one Maxwell-Boltzmann velocity component."""
        return math.sqrt(self.boltzmann_k * self.temperature / self.atomic_mass)


def default_delta_k() -> float:
    return delta_k_from_geometry(WRITE_WAVELENGTH, WRITE_WAVELENGTH, DETECTION_ANGLE)


def default_dephasing() -> DephasingModel:
    """Dephasing model whose tau equals the fitted retrieval decay time."""
    return DephasingModel.from_tau(MEASURED_TAU)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("storage time must be finite and >= 0")
    return t


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def intrinsic_retrieval(t, eta0: float, tau: float):
    """``eta0 * exp(-t**2 / tau**2)``; accepts scalar or array ``t``."""
    if not 0.0 <= eta0 <= 1.0:
        raise DomainError(f"eta0 must lie in [0, 1], got {eta0!r}")
    if not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau!r}")
    t = _check_time(t)
    return _scalar(eta0 * np.exp(-((t / tau) ** 2)))


@dataclass(frozen=True)
class DetectionProbabilities:
    p_cw: float
    p_r: float
    p_cwr: float


def detection_probabilities(t, params: ExperimentParams, deph: DephasingModel) -> DetectionProbabilities:
    """Noise-free single and coincidence detection probabilities at storage time ``t``."""
    check_params(params)
    eta_i = intrinsic_retrieval(t, params.eta_ret_intrinsic, deph.tau)
    random_r = params.n_s * (1.0 - eta_i) * (params.solid_angle_r / FOUR_PI) * params.xi_g * params.eta_r
    p_cw = params.p * params.eta_cw
    p_r = params.p * eta_i * params.eta_r + random_r
    p_cwr = params.p * eta_i * params.eta_cw * params.eta_r + params.p * params.eta_cw * random_r
    if np.ndim(t) != 0:
        p_cw = np.full_like(np.asarray(p_r, dtype=float), p_cw)
    return DetectionProbabilities(p_cw=p_cw, p_r=p_r, p_cwr=p_cwr)


def retrieval_efficiency_closed(t, params: ExperimentParams, deph: DephasingModel):
    """Raw retrieval efficiency ``p_cw,r / p_cw`` in closed form.

    Uses ``N_s dOmega_r / 4 pi = p`` (equal solid angles).
    """
    check_params(params)
    x = intrinsic_retrieval(t, params.eta_ret_intrinsic, deph.tau)
    pxi = params.p * params.xi_g * params.solid_angle_r / params.solid_angle_w
    return params.eta_r * (x * (1.0 - pxi) + pxi)


def g2_cross_closed(t, params: ExperimentParams, deph: DephasingModel):
    """Normalized write/read cross-correlation in closed form (noise-free)."""
    check_params(params)
    if params.p <= 0:
        raise DomainError("p = 0: no pairs, cross-correlation undefined")
    x = intrinsic_retrieval(t, params.eta_ret_intrinsic, deph.tau)
    xi = params.xi_g * params.solid_angle_r / params.solid_angle_w
    p = params.p
    return 1.0 + x * (1.0 - p) / (p * (x * (1.0 - xi) + xi))


def eta_ret_intrinsic_for_g2(g2_at_zero: float, params: ExperimentParams) -> float:
    """Intrinsic retrieval efficiency that yields ``g2_at_zero`` at ``t = 0``.

    Inverts the closed-form cross-correlation for fixed ``p`` and ``xi_g``.
    """
    if not g2_at_zero > 1:
        raise DomainError("target cross-correlation must exceed 1")
    p, xi = params.p, params.xi_g * params.solid_angle_r / params.solid_angle_w
    if p <= 0:
        raise DomainError("p must be > 0")
    g = g2_at_zero
    # (x + p xi (1-x)) = g p (x + xi (1-x))  ->  linear in x
    denom = (1.0 - p * xi) - g * p * (1.0 - xi)
    if denom <= 0:
        raise DomainError(f"g2(0) = {g!r} is unreachable at p = {p!r}")
    x = (g * p * xi - p * xi) / denom
    if not 0 <= x <= 1:
        raise DomainError(f"g2(0) = {g!r} needs eta_ret_intrinsic = {x!r} outside [0, 1]")
    return x


#: Write-pulse power used for the storage-time measurements.
STORAGE_WRITE_POWER = _ref("memory", "storage_write_power")
STORAGE_G2_AT_ZERO = 20.0


def storage_calibrated_params(base: ExperimentParams | None = None,
                              write_power: float = STORAGE_WRITE_POWER,
                              g2_at_zero: float = STORAGE_G2_AT_ZERO) -> ExperimentParams:
    """Parameters for the storage-time sweep.

    ``p`` follows from the write power, and ``eta_ret_intrinsic`` is solved so
    the noise-free cross-correlation at zero storage time equals
    ``g2_at_zero``.
    """
    base = base or default_paper_params()
    params = replace(base, p=p_from_write_power(write_power, base))
    return replace(params, eta_ret_intrinsic=eta_ret_intrinsic_for_g2(g2_at_zero, params))


class OverlapEstimate(NamedTuple):
    mean: float
    stderr: float


def _overlap_one(seed: int, index: int, n_atoms: int, phase_scale: float) -> float:
    rng = stream(seed, "dephasing", index)
    phases = phase_scale * rng.standard_normal(n_atoms)
    s = np.exp(1j * phases).mean()
    return s.real**2 + s.imag**2


def dephasing_overlap_mc(n_atoms: int, deph: DephasingModel, t: float, realizations: int,
                         seed: int, workers: int = 1) -> OverlapEstimate:
    """Brute-force estimate of the spin-wave overlap ``|<Psi(0)|Psi(t)>|**2``.

    Draws one velocity component per atom along the wave-vector difference
    and averages ``|mean_j exp(i dk v_j t)|**2`` over independent
    realizations. The expectation is ``(1 - 1/N) exp(-t**2/tau**2) + 1/N``.
    Each realization has its own random stream, so the result does not
    depend on ``workers``.
    """
    if n_atoms < 2:
        raise DomainError("n_atoms must be >= 2")
    if realizations < 1:
        raise DomainError("realizations must be >= 1")
    if t < 0:
        raise DomainError("t must be >= 0")
    phase_scale = deph.delta_k * deph.velocity_sigma * t
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(lambda i: _overlap_one(seed, i, n_atoms, phase_scale), range(realizations)))
    else:
        values = [_overlap_one(seed, i, n_atoms, phase_scale) for i in range(realizations)]
    values = np.asarray(values)
    stderr = values.std(ddof=1) / math.sqrt(realizations) if realizations > 1 else 0.0
    return OverlapEstimate(float(values.mean()), float(stderr))


def expected_overlap(n_atoms: int, t: float, tau: float) -> float:
    """Finite-ensemble expectation of :func:`dephasing_overlap_mc`."""
    return (1.0 - 1.0 / n_atoms) * math.exp(-((t / tau) ** 2)) + 1.0 / n_atoms
