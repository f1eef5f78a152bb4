"""Trial-level Monte Carlo of click records in the memory + converter experiment.

Each trial draws a thermal number of write-photon/spin-wave pairs. Write
photons survive the write chain with a fixed efficiency, stored excitations
are read out directionally with the dephased intrinsic retrieval efficiency,
and random read emission, write noise and read noise are independent
Bernoulli events. Detectors are threshold detectors. Each arm is split on a
50/50 beam splitter into sub-detectors A and B, which gives the unheralded
autocorrelation. An arm "clicks" when A or B clicks.

Trials are processed in fixed-size blocks. Every block has its own
counter-based random stream keyed by (seed, block index). Inside a block
only the trials touched by at least one event are materialized, because
pairs and noise clicks are rare. The tallies are therefore bit-identical
for any number of workers.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .dlcz import DephasingModel, default_dephasing, intrinsic_retrieval
from .errors import ClampWarning, DomainError
from .params import FOUR_PI, ExperimentParams, check_params, default_paper_params
from .qfc import OPERATING_PUMP_POWER, ConversionDevice, eta_device, eta_internal, noise_probability
from .rng import stream

BLOCK_SIZE = 1 << 20

_COUNT_FIELDS = (
    "clicks_w", "clicks_r", "coincidences_wr",
    "clicks_w_splitA", "clicks_w_splitB", "coinc_w_AB",
    "clicks_r_splitA", "clicks_r_splitB", "coinc_r_AB",
)


@dataclass(frozen=True)
class TrialCounts:
    """Aggregated click and coincidence tallies over ``n_trials`` trials."""

    n_trials: int
    clicks_w: int = 0
    clicks_r: int = 0
    coincidences_wr: int = 0
    clicks_w_splitA: int = 0
    clicks_w_splitB: int = 0
    coinc_w_AB: int = 0
    clicks_r_splitA: int = 0
    clicks_r_splitB: int = 0
    coinc_r_AB: int = 0
    clamped: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_trials < 1:
            raise DomainError("n_trials must be >= 1")
        for name in _COUNT_FIELDS:
            value = getattr(self, name)
            if not 0 <= value <= self.n_trials:
                raise DomainError(f"{name}={value} outside [0, n_trials]")
        pairs = (
            ("coincidences_wr", "clicks_w", "clicks_r"),
            ("coinc_w_AB", "clicks_w_splitA", "clicks_w_splitB"),
            ("coinc_r_AB", "clicks_r_splitA", "clicks_r_splitB"),
        )
        for coinc, a, b in pairs:
            if getattr(self, coinc) > min(getattr(self, a), getattr(self, b)):
                raise DomainError(f"{coinc} exceeds the smaller of {a}, {b}")

    def __add__(self, other: "TrialCounts") -> "TrialCounts":
        merged = {name: getattr(self, name) + getattr(other, name) for name in _COUNT_FIELDS}
        clamped = tuple(dict.fromkeys(self.clamped + other.clamped))
        return TrialCounts(n_trials=self.n_trials + other.n_trials, clamped=clamped, **merged)

    def as_dict(self) -> dict:
        return {"n_trials": self.n_trials, **{name: getattr(self, name) for name in _COUNT_FIELDS}}


@dataclass(frozen=True)
class SimulationConfig:
    params: ExperimentParams = field(default_factory=default_paper_params)
    device: ConversionDevice = field(default_factory=ConversionDevice)
    deph: DephasingModel = field(default_factory=default_dephasing)
    storage_time: float = 0.0
    n_trials: int = 10**6
    seed: int = 0
    converted: bool = True
    pump_power: float = OPERATING_PUMP_POWER

    def __post_init__(self):
        if self.n_trials < 1:
            raise DomainError("n_trials must be >= 1")
        if self.storage_time < 0:
            raise DomainError("storage_time must be >= 0")
        if self.seed < 0:
            raise DomainError("seed must be >= 0")
        check_params(self.params)


class ArmProbabilities(NamedTuple):
    """Per-trial event probabilities driving the simulation."""

    p_mean: float
    eta_w: float
    eta_read: float
    random_read: float
    noise_w: float
    noise_r: float
    clamped: tuple


def arm_probabilities(config: SimulationConfig) -> ArmProbabilities:
    """Reduce a configuration to the event probabilities of one trial.

    In the converted configuration ``params.eta_cw`` is read as the write-arm
    efficiency at peak conversion and scales with ``eta_int(P) / eta_int_max``;
    the write noise is the pump-induced noise of the device. Otherwise the
    write photon passes a reference filter with efficiency ``eta_cw`` and the
    measured write noise ``p_noise_w`` applies.
    """
    params, dev = config.params, config.device
    clamped = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        if config.converted:
            eta_w = params.eta_cw * eta_internal(config.pump_power, dev) / dev.eta_int_max
            noise_w = noise_probability(config.pump_power, dev)
        else:
            eta_w = params.eta_cw
            noise_w = params.p_noise_w
    clamped.extend(str(w.message) for w in caught if issubclass(w.category, ClampWarning))
    eta_i = intrinsic_retrieval(config.storage_time, params.eta_ret_intrinsic, config.deph.tau)
    random_read = params.n_s * (1.0 - eta_i) * (params.solid_angle_r / FOUR_PI) * params.xi_g * params.eta_r
    if random_read > 1.0:
        clamped.append("random emission probability clamped into [0, 1]")
        random_read = 1.0
    return ArmProbabilities(
        p_mean=params.p,
        eta_w=float(eta_w),
        eta_read=float(eta_i * params.eta_r),
        random_read=float(random_read),
        noise_w=float(noise_w),
        noise_r=params.p_noise_r,
        clamped=tuple(clamped),
    )


def sample_pair_number(p_mean: float, rng: np.random.Generator, size=None):
    """Draw from the thermal distribution ``P(n) = p**n / (1 + p)**(n + 1)``."""
    if not 0 <= p_mean < 1:
        raise DomainError(f"p_mean must lie in [0, 1), got {p_mean!r}")
    if p_mean == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    return rng.geometric(1.0 / (1.0 + p_mean), size=size) - 1


def _positions(rng, m, q):
    if q <= 0:
        return np.empty(0, dtype=np.int64)
    if q >= 1:
        return np.arange(m, dtype=np.int64)
    k = rng.binomial(m, q)
    return np.sort(rng.choice(m, size=k, replace=False))


class _Active(NamedTuple):
    index: np.ndarray
    w_a: np.ndarray
    w_b: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray


def _run_block(probs: ArmProbabilities, seed: int, block: int, m: int) -> _Active:
    rng = stream(seed, "trials", block)
    ratio = probs.p_mean / (1.0 + probs.p_mean)
    pos_pair = _positions(rng, m, ratio)
    pos_rand = _positions(rng, m, probs.random_read)
    pos_nw = _positions(rng, m, probs.noise_w)
    pos_nr = _positions(rng, m, probs.noise_r)
    active = np.unique(np.concatenate([pos_pair, pos_rand, pos_nw, pos_nr]))
    k = active.size

    n = np.zeros(k, dtype=np.int64)
    if pos_pair.size:
        # conditioned on n >= 1 the thermal count is 1 + geometric excess
        n[np.searchsorted(active, pos_pair)] = rng.geometric(1.0 - ratio, size=pos_pair.size)

    def extra(pos):
        out = np.zeros(k, dtype=np.int64)
        out[np.searchsorted(active, pos)] = 1
        return out

    k_w = rng.binomial(n, probs.eta_w) + extra(pos_nw)
    k_r = rng.binomial(n, probs.eta_read) + extra(pos_rand) + extra(pos_nr)
    w_a = rng.binomial(k_w, 0.5)
    r_a = rng.binomial(k_r, 0.5)
    return _Active(active, w_a > 0, (k_w - w_a) > 0, r_a > 0, (k_r - r_a) > 0)


def _tally(a: _Active, m: int, clamped=()) -> TrialCounts:
    w = a.w_a | a.w_b
    r = a.r_a | a.r_b
    return TrialCounts(
        n_trials=m,
        clicks_w=int(w.sum()),
        clicks_r=int(r.sum()),
        coincidences_wr=int((w & r).sum()),
        clicks_w_splitA=int(a.w_a.sum()),
        clicks_w_splitB=int(a.w_b.sum()),
        coinc_w_AB=int((a.w_a & a.w_b).sum()),
        clicks_r_splitA=int(a.r_a.sum()),
        clicks_r_splitB=int(a.r_b.sum()),
        coinc_r_AB=int((a.r_a & a.r_b).sum()),
        clamped=tuple(clamped),
    )


def _blocks(n_trials):
    full, rest = divmod(n_trials, BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def simulate(config: SimulationConfig, workers: int = 1) -> TrialCounts:
    """Simulate ``config.n_trials`` trials and return the merged tallies."""
    probs = arm_probabilities(config)
    blocks = _blocks(config.n_trials)

    def work(item):
        block, m = item
        return _tally(_run_block(probs, config.seed, block, m), m)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(item) for item in blocks]
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return replace(total, clamped=probs.clamped)


@dataclass(frozen=True)
class ClickRecord:
    """Per-trial boolean click record of every sub-detector."""

    w_a: np.ndarray
    w_b: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray

    @property
    def w(self):
        return self.w_a | self.w_b

    @property
    def r(self):
        return self.r_a | self.r_b

    def tally(self) -> TrialCounts:
        return _tally(_Active(np.arange(self.w_a.size), self.w_a, self.w_b, self.r_a, self.r_b), self.w_a.size)


def simulate_records(config: SimulationConfig) -> ClickRecord:
    """Dense per-trial records, consistent with :func:`simulate` for the same config."""
    probs = arm_probabilities(config)
    arrays = {name: np.zeros(config.n_trials, dtype=bool) for name in ("w_a", "w_b", "r_a", "r_b")}
    for block, m in _blocks(config.n_trials):
        a = _run_block(probs, config.seed, block, m)
        idx = block * BLOCK_SIZE + a.index
        for name in arrays:
            arrays[name][idx] = getattr(a, name)
    return ClickRecord(**arrays)


class EmpiricalProbabilities(NamedTuple):
    p_cw: float
    p_r: float
    p_cwr: float
    p_cwcw: float
    p_rr: float


def _split_corrected(n_ab, n_a, n_b, n_arm, n):
    # rescale the split-detector coincidence so that p_xx / p_x**2 equals
    # p_AB / (p_A p_B), undoing the 50/50 routing
    if n_a == 0 or n_b == 0:
        return math.nan
    return (n_ab / n) * (n_arm / n) ** 2 / ((n_a / n) * (n_b / n))


def empirical_probabilities(counts: TrialCounts) -> EmpiricalProbabilities:
    n = counts.n_trials
    return EmpiricalProbabilities(
        p_cw=counts.clicks_w / n,
        p_r=counts.clicks_r / n,
        p_cwr=counts.coincidences_wr / n,
        p_cwcw=_split_corrected(counts.coinc_w_AB, counts.clicks_w_splitA, counts.clicks_w_splitB, counts.clicks_w, n),
        p_rr=_split_corrected(counts.coinc_r_AB, counts.clicks_r_splitA, counts.clicks_r_splitB, counts.clicks_r, n),
    )


class CoherentCounts(NamedTuple):
    n_trials: int
    clicks: int
    noise_clicks: int


def simulate_coherent_input(mu_in: float, pump_power: float, dev: ConversionDevice,
                            n_trials: int, seed: int) -> CoherentCounts:
    """Click tallies for a weak coherent input through the converter.

    One run with the input on (signal plus noise) and one with the input
    blocked (noise only), each of ``n_trials`` gates. Photon number is
    Poissonian, so trials are independent and the tallies are binomial.
    """
    if mu_in < 0:
        raise DomainError("mu_in must be >= 0")
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    p_signal = -math.expm1(-mu_in * eta_device(pump_power, dev) * dev.detector_eff)
    p_noise = noise_probability(pump_power, dev)
    p_click = 1.0 - (1.0 - p_signal) * (1.0 - p_noise)
    rng = stream(seed, "coherent", 0)
    return CoherentCounts(n_trials, int(rng.binomial(n_trials, p_click)), int(rng.binomial(n_trials, p_noise)))


CSV_HEADER = ("config_hash", "seed") + ("n_trials",) + _COUNT_FIELDS


def counts_csv(counts: TrialCounts, config_hash: str, seed: int) -> str:
    """One header line and one data row describing ``counts``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    row = counts.as_dict()
    writer.writerow([config_hash, seed] + [row[name] for name in CSV_HEADER[2:]])
    return buf.getvalue()
