"""Correlation estimators and figures of merit with +/-1 sd uncertainties.

Errors follow Poisson counting statistics, propagated to first order with
relative errors added in quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

from .errors import DomainError
from .sim import TrialCounts

LABELS = ("g2_cross", "g2_auto_w", "g2_auto_r", "snr", "R", "vmax", "eta_h")

#: 1 sd upper limit on the mean of a Poisson variable observed as zero.
ZERO_COUNT_UPPER = 1.841

BELL_THRESHOLD = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    sigma: float
    n_trials: int | None = None
    label: str = "g2_cross"
    one_sided: bool = False
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if not self.sigma >= 0:
            raise DomainError("sigma must be >= 0")
        if self.value < 0 and "negative_snr" not in self.flags:
            raise DomainError(f"{self.label} value must be >= 0")

    def __iter__(self):
        yield self.value
        yield self.sigma


Measured = Union[CorrelationEstimate, tuple]


def _vs(x: Measured) -> tuple[float, float]:
    value, sigma = x
    return float(value), float(sigma)


def g2_from_counts(n_ab: float, n_a: float, n_b: float, n_trials: int,
                   label: str = "g2_cross") -> CorrelationEstimate:
    """``p_ab / (p_a p_b)`` from raw counts.

    Counts may be non-integer when derived from published probabilities.
    A zero coincidence count gives value 0 with a one-sided upper error.
    """
    if n_a <= 0 or n_b <= 0:
        raise DomainError("correlation undefined: a single-detector count is zero")
    scale = n_trials / (n_a * n_b)
    if n_ab == 0:
        return CorrelationEstimate(0.0, ZERO_COUNT_UPPER * scale, n_trials, label, one_sided=True)
    value = n_ab * scale
    rel = math.sqrt(1.0 / n_ab + 1.0 / n_a + 1.0 / n_b)
    return CorrelationEstimate(value, value * rel, n_trials, label)


def g2_from_probabilities(p_ab: float, p_a: float, p_b: float, n_trials: int,
                          label: str = "g2_cross") -> CorrelationEstimate:
    """Same estimator for externally supplied per-trial probabilities."""
    return g2_from_counts(p_ab * n_trials, p_a * n_trials, p_b * n_trials, n_trials, label)


def g2_cross(counts: TrialCounts) -> CorrelationEstimate:
    return g2_from_counts(counts.coincidences_wr, counts.clicks_w, counts.clicks_r, counts.n_trials)


def g2_auto(counts: TrialCounts, arm: str = "w") -> CorrelationEstimate:
    """Unheralded autocorrelation of one arm from its split-detector tallies."""
    if arm == "w":
        n_ab, n_a, n_b = counts.coinc_w_AB, counts.clicks_w_splitA, counts.clicks_w_splitB
    elif arm == "r":
        n_ab, n_a, n_b = counts.coinc_r_AB, counts.clicks_r_splitA, counts.clicks_r_splitB
    else:
        raise ValueError(f"arm must be 'w' or 'r', got {arm!r}")
    return g2_from_counts(n_ab, n_a, n_b, counts.n_trials, label=f"g2_auto_{arm}")


def cauchy_schwarz_R(g2_cross: Measured, g2_auto_w: Measured, g2_auto_r: Measured) -> CorrelationEstimate:
    """``R = g2_cross**2 / (g2_auto_w * g2_auto_r)``; ``R > 1`` is non-classical."""
    x, sx = _vs(g2_cross)
    a, sa = _vs(g2_auto_w)
    b, sb = _vs(g2_auto_r)
    if a <= 0 or b <= 0:
        raise DomainError("autocorrelations must be > 0")
    value = x * x / (a * b)
    if x == 0:
        return CorrelationEstimate(0.0, 0.0, label="R")
    rel = math.sqrt((2 * sx / x) ** 2 + (sa / a) ** 2 + (sb / b) ** 2)
    return CorrelationEstimate(value, value * rel, label="R")


def violation_significance(R: Measured) -> float:
    """Distance of ``R`` above the classical bound 1, in standard deviations."""
    value, sigma = _vs(R)
    if sigma <= 0:
        raise DomainError("sigma must be > 0")
    return (value - 1.0) / sigma


def snr_from_counts(p_cw: float, p_N: float, n_trials: int,
                    n_trials_noise: int | None = None) -> CorrelationEstimate:
    """``(p_cw - p_N) / p_N`` with Poisson errors on both measurements.

    ``n_trials_noise`` is the number of trials of the blocked-signal
    measurement and defaults to ``n_trials``. ``p_N = 0`` yields an infinite
    value flagged ``infinite_snr``; ``p_cw < p_N`` is reported with the
    ``negative_snr`` flag.
    """
    if p_cw < 0 or p_N < 0:
        raise DomainError("probabilities must be >= 0")
    n_noise = n_trials if n_trials_noise is None else n_trials_noise
    if p_N == 0:
        return CorrelationEstimate(math.inf, 0.0, n_trials, "snr", flags=("infinite_snr",))
    value = (p_cw - p_N) / p_N
    var_cw = p_cw / n_trials
    var_n = p_N / n_noise
    sigma = math.sqrt(var_cw / p_N**2 + (p_cw / p_N**2) ** 2 * var_n)
    flags = ("negative_snr",) if value < 0 else ()
    return CorrelationEstimate(value, sigma, n_trials, "snr", flags=flags)


class Visibility(NamedTuple):
    value: float
    bell_violation_possible: bool


def max_visibility(g2: float) -> Visibility:
    """Upper bound on two-photon interference visibility, ``(g2 - 1) / (g2 + 1)``."""
    if g2 < 1:
        raise DomainError(f"g2 must be >= 1, got {g2!r}")
    if math.isinf(g2):
        return Visibility(1.0, True)
    v = (g2 - 1.0) / (g2 + 1.0)
    return Visibility(v, v > BELL_THRESHOLD)


def max_heralding_efficiency(snr: float) -> float:
    if snr < 0:
        raise DomainError(f"SNR must be >= 0, got {snr!r}")
    if math.isinf(snr):
        return 1.0
    return snr / (snr + 1.0)
