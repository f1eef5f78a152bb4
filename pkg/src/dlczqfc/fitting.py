"""Weighted least-squares fits of SNR slopes, storage-time decays and conversion saturation.

The core is a damped Gauss-Newton minimizer (Levenberg-Marquardt with
Marquardt scaling and x10 / /10 damping updates). Parameter errors come
from the inverse curvature matrix at the optimum, inflated by the reduced
chi-square when that exceeds one.

Each model is available as a plain function returning :class:`FitResult`
and as a scikit-learn compatible regressor taking ``X`` of shape
``(n_samples, 1)`` and optional per-point ``sigma`` in ``fit``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dlcz import DephasingModel, default_dephasing, g2_cross_closed, retrieval_efficiency_closed
from .errors import FitError, SingularFitError
from .params import ExperimentParams, default_paper_params

MAX_ITER = 200
XTOL = 1e-8
_SINGULAR_RCOND = 1e-10


@dataclass(frozen=True)
class FitResult:
    parameters: dict[str, tuple[float, float]]
    chi2: float
    dof: int
    converged: bool
    iterations: int
    covariance: np.ndarray = field(repr=False, compare=False)
    diagnostics: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> tuple[float, float]:
        return self.parameters[name]

    def value(self, name: str) -> float:
        return self.parameters[name][0]

    def sigma(self, name: str) -> float:
        return self.parameters[name][1]

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof


def _as_points(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise FitError("points must be a sequence of (x, y, sigma_y) triples")
    x, y, s = arr.T
    if not np.all(np.isfinite(arr)):
        raise FitError("points contain non-finite values")
    if np.any(s <= 0):
        raise FitError("every sigma_y must be > 0")
    return x, y, s


def numeric_jacobian(model: Callable, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of ``model(x, theta)`` with relative steps."""
    jac = np.empty((x.size, theta.size))
    for i, value in enumerate(theta):
        h = 1e-6 * abs(value) if value != 0 else 1e-9
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        jac[:, i] = (model(x, up) - model(x, dn)) / (2 * h)
    return jac


def _check_identifiable(jw: np.ndarray, names: Sequence[str]):
    norms = np.linalg.norm(jw, axis=0)
    dead = [n for n, v in zip(names, norms) if not v > 0]
    if dead:
        raise SingularFitError(f"parameters {dead} do not affect the model: curvature is singular")
    sv = np.linalg.svd(jw / norms, compute_uv=False)
    if sv[-1] < _SINGULAR_RCOND * sv[0]:
        raise SingularFitError("curvature matrix is singular: parameters are not separately identifiable")


def least_squares(model: Callable, x, y, sigma, p0, names: Sequence[str],
                  jacobian: Callable | None = None, max_iter: int = MAX_ITER,
                  xtol: float = XTOL) -> FitResult:
    """Minimize ``sum(((y - model(x, theta)) / sigma)**2)`` by damped Gauss-Newton.

    Parameters
    ----------
    model : callable
        ``model(x, theta) -> y_model``.
    jacobian : callable, optional
        ``jacobian(x, theta) -> (n_points, n_params)``; central differences
        are used when omitted.
    max_iter, xtol : int, float
        The fit is converged when an accepted step changes every parameter
        by less than ``xtol`` relative to its magnitude.

    Raises
    ------
    SingularFitError
        If the curvature matrix at the optimum is singular.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.asarray(sigma, dtype=float)
    theta = np.array(p0, dtype=float)
    k = theta.size
    dof = y.size - k
    if dof < 1:
        raise FitError(f"{y.size} points cannot constrain {k} parameters with dof >= 1")
    jac = jacobian or (lambda xx, th: numeric_jacobian(model, xx, th))

    def chi2_of(th):
        r = (y - model(x, th)) * w
        return float(r @ r), r

    chi2, r = chi2_of(theta)
    if not math.isfinite(chi2):
        raise FitError("model is not finite at the initial guess")
    lam = 1e-3
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        jw = jac(x, theta) * w[:, None]
        scale = np.sqrt(np.maximum(np.einsum("ij,ij->j", jw, jw), 1e-300))
        while True:
            # damped normal equations solved as an augmented least-squares problem
            aug = np.vstack([jw, math.sqrt(lam) * np.diag(scale)])
            rhs = np.concatenate([r, np.zeros(k)])
            step = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            trial = theta + step
            rel = np.max(np.abs(step) / np.maximum(np.abs(theta), 1e-300))
            new_chi2, new_r = chi2_of(trial)
            if math.isfinite(new_chi2) and new_chi2 <= chi2:
                theta, chi2, r = trial, new_chi2, new_r
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
            if rel < xtol or lam > 1e16:
                break
        if rel < xtol:
            converged = True
            break

    jw = jac(x, theta) * w[:, None]
    _check_identifiable(jw, names)
    cov = np.linalg.pinv(jw.T @ jw, rcond=1e-15)
    red = chi2 / dof
    if red > 1.0:
        cov = cov * red
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    diagnostics = () if converged else (f"not converged after {it} iterations (last relative step {rel:.3g})",)
    return FitResult(
        parameters={n: (float(v), float(e)) for n, v, e in zip(names, theta, errs)},
        chi2=chi2, dof=dof, converged=converged, iterations=it,
        covariance=cov, diagnostics=diagnostics,
    )


# -- linear through the origin -------------------------------------------------

def _linear_model(x, th):
    return th[0] * x


def _linear_jac(x, th):
    return x[:, None].astype(float)


def fit_linear_origin(points, method: str = "closed") -> FitResult:
    """Weighted slope of ``y = a x`` (e.g. SNR versus mean input photon number)."""
    x, y, s = _as_points(points)
    if x.size < 2:
        raise FitError("need at least 2 points")
    if np.all(x == 0):
        raise SingularFitError("all x are zero: slope undefined")
    if method == "iterative":
        return least_squares(_linear_model, x, y, s, [0.0], ["slope"], jacobian=_linear_jac)
    if method != "closed":
        raise ValueError("method must be 'closed' or 'iterative'")
    w = 1.0 / s**2
    sxx = float(np.sum(w * x * x))
    slope = float(np.sum(w * x * y)) / sxx
    resid = (y - slope * x) / s
    chi2 = float(resid @ resid)
    dof = x.size - 1
    var = 1.0 / sxx
    if chi2 / dof > 1.0:
        var *= chi2 / dof
    return FitResult({"slope": (slope, math.sqrt(var))}, chi2, dof, True, 0, np.array([[var]]))


# -- Gaussian decay ------------------------------------------------------------

def gaussian_decay(t, amplitude, tau, floor):
    return amplitude * np.exp(-((np.asarray(t) / tau) ** 2)) + floor


def _gauss_model(t, th):
    return gaussian_decay(t, *th)


def _gauss_jac(t, th):
    a, tau, _ = th
    e = np.exp(-((t / tau) ** 2))
    return np.column_stack([e, a * e * 2 * t**2 / tau**3, np.ones_like(t)])


def decay_initial_guess(t, y) -> tuple[float, float, float]:
    """Amplitude from the earliest point, floor from the latest, tau from the 1/e level."""
    order = np.argsort(t)
    t, y = t[order], y[order]
    floor = float(y[-1])
    amplitude = float(y[0] - floor)
    level = floor + amplitude / math.e
    tau = None
    if amplitude != 0:
        below = np.nonzero((y - level) * np.sign(amplitude) <= 0)[0]
        if below.size and below[0] > 0:
            i = below[0]
            t0, t1, y0, y1 = t[i - 1], t[i], y[i - 1], y[i]
            tau = t0 + (level - y0) * (t1 - t0) / (y1 - y0) if y1 != y0 else t1
    if not tau or tau <= 0:
        tau = float(np.median(t[t > 0])) if np.any(t > 0) else 1.0
    return amplitude, float(tau), floor


def _storage_model(observable, base: ExperimentParams, deph: DephasingModel):
    closed = g2_cross_closed if observable == "g2" else retrieval_efficiency_closed

    def model(t, th):
        p, eta0, tau = th
        if not (0 < p < 1 and 0 <= eta0 <= 1 and tau > 0):
            return np.full_like(t, np.inf)
        params = replace(base, p=float(p), eta_ret_intrinsic=float(eta0))
        return np.asarray(closed(t, params, _with_tau(deph, tau)), dtype=float)

    return model


def _with_tau(deph: DephasingModel, tau: float) -> DephasingModel:
    return DephasingModel.from_tau(abs(tau), deph.delta_k, deph.atomic_mass)


STORAGE_NAMES = ("p", "eta_ret_intrinsic", "tau")


def fit_gaussian_decay(points, mode: str = "gaussian", p0=None,
                       params: ExperimentParams | None = None,
                       deph: DephasingModel | None = None) -> FitResult:
    """Fit a storage-time decay.

    ``mode="gaussian"`` fits ``amplitude exp(-t**2/tau**2) + floor``.
    ``mode="retrieval"`` and ``mode="g2"`` fit the closed-form retrieval
    efficiency or cross-correlation with ``(p, eta_ret_intrinsic, tau)`` free;
    the remaining parameters come from ``params``, and ``params``/``deph``
    also supply the starting point unless ``p0`` is given.
    """
    t, y, s = _as_points(points)
    if t.size < 4:
        raise FitError("need at least 4 points")
    if np.any(t < 0):
        raise FitError("storage times must be >= 0")
    if mode == "gaussian":
        guess = p0 if p0 is not None else decay_initial_guess(t, y)
        res = least_squares(_gauss_model, t, y, s, guess, ("amplitude", "tau", "floor"), jacobian=_gauss_jac)
        tau, tau_sigma = res["tau"]
        # the model is even in tau
        return replace(res, parameters={**res.parameters, "tau": (abs(tau), tau_sigma)})
    if mode not in ("retrieval", "g2"):
        raise ValueError("mode must be 'gaussian', 'retrieval' or 'g2'")
    base = params or default_paper_params()
    deph = deph or default_dephasing()
    if p0 is None:
        p0 = _storage_guess(mode, t, y, base, deph)
    model = _storage_model(mode, base, deph)
    return least_squares(model, t, y, s, p0, STORAGE_NAMES)


def _storage_guess(mode, t, y, base: ExperimentParams, deph: DephasingModel):
    if mode == "retrieval":
        amp, tau, floor = decay_initial_guess(t, y)
        xi = base.xi_g * base.solid_angle_r / base.solid_angle_w
        p = min(max(floor / (base.eta_r * xi), 1e-6), 0.5)
        eta0 = min(max(amp / (base.eta_r * (1 - p * xi)), 1e-6), 1.0)
        return [p, eta0, tau]
    _, tau, _ = decay_initial_guess(t, np.log(np.maximum(y - 1.0, 1e-12)))
    return [base.p, base.eta_ret_intrinsic, tau if tau > 0 else deph.tau]


# -- conversion saturation -----------------------------------------------------

def saturation_curve(P, eta_max, eta_n, length):
    return eta_max * np.sin(length * np.sqrt(eta_n * np.asarray(P))) ** 2


def _saturation_funcs(length):
    def model(P, th):
        eta_max, eta_n = th
        if eta_n <= 0:
            return np.full_like(P, np.inf)
        return saturation_curve(P, eta_max, eta_n, length)

    def jac(P, th):
        eta_max, eta_n = th
        phase = length * np.sqrt(eta_n * P)
        d_eta_n = eta_max * np.sin(2 * phase) * length * np.sqrt(P) / (2 * math.sqrt(eta_n))
        return np.column_stack([np.sin(phase) ** 2, d_eta_n])

    return model, jac


def _saturation_guess(P, y, s, length):
    # profile over eta_n: for each candidate eta_max is linear and solved exactly
    w = 1.0 / s**2
    best = None
    for eta_n in np.geomspace(1e-3, 1e3, 601):
        f = np.sin(length * np.sqrt(eta_n * P)) ** 2
        den = float(np.sum(w * f * f))
        if den == 0:
            continue
        eta_max = float(np.sum(w * f * y)) / den
        chi2 = float(np.sum(w * (y - eta_max * f) ** 2))
        if best is None or chi2 < best[0]:
            best = (chi2, eta_max, eta_n)
    if best is None:
        return [float(np.max(y)) or 1.0, 1.0]
    return [best[1], best[2]]


def fit_saturation(points, length: float = 3.0, p0=None) -> FitResult:
    """Fit ``eta_max sin^2(length sqrt(eta_n P))`` with ``eta_max`` and ``eta_n`` free."""
    P, y, s = _as_points(points)
    if P.size < 4:
        raise FitError("need at least 4 points")
    if np.any(P < 0):
        raise FitError("pump powers must be >= 0")
    if np.all(P == 0):
        raise SingularFitError("all pump powers are zero: efficiency curve unconstrained")
    model, jac = _saturation_funcs(length)
    guess = p0 if p0 is not None else _saturation_guess(P, y, s, length)
    res = least_squares(model, P, y, s, guess, ("eta_max", "eta_n"), jacobian=jac)
    p_opt = (math.pi / (2 * length)) ** 2 / res.value("eta_n")
    if P.max() < 0.5 * p_opt:
        res = replace(res, diagnostics=res.diagnostics + (
            f"pump powers reach only {P.max():.3g} W, below half the fitted optimum {p_opt:.3g} W",))
    return res


# -- scikit-learn style estimators ----------------------------------------------

def _xy_sigma(X, y, sigma):
    X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single feature column, got {X.shape[1]}")
    x = X[:, 0]
    s = np.ones_like(y) if sigma is None else np.asarray(sigma, dtype=float)
    if s.shape != y.shape:
        raise ValueError("sigma must have the same length as y")
    return np.column_stack([x, y, s])


def _x(X):
    X = check_array(X)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single feature column, got {X.shape[1]}")
    return X[:, 0]


class LinearOriginRegressor(RegressorMixin, BaseEstimator):
    """``y = slope * x``, e.g. SNR against mean input photon number."""

    def __init__(self, method="closed"):
        self.method = method

    def fit(self, X, y, sigma=None):
        self.result_ = fit_linear_origin(_xy_sigma(X, y, sigma), method=self.method)
        self.slope_, self.slope_sigma_ = self.result_["slope"]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.slope_ * _x(X)


class GaussianDecayRegressor(RegressorMixin, BaseEstimator):
    """``amplitude * exp(-t**2 / tau**2) + floor`` against storage time."""

    def __init__(self, p0=None):
        self.p0 = p0

    def fit(self, X, y, sigma=None):
        self.result_ = fit_gaussian_decay(_xy_sigma(X, y, sigma), p0=self.p0)
        self.amplitude_ = self.result_.value("amplitude")
        self.tau_ = self.result_.value("tau")
        self.floor_ = self.result_.value("floor")
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return gaussian_decay(_x(X), self.amplitude_, self.tau_, self.floor_)


class StorageModelRegressor(RegressorMixin, BaseEstimator):
    """Closed-form retrieval efficiency or cross-correlation against storage time.

    Parameters
    ----------
    observable : {"retrieval", "g2"}
    params : ExperimentParams, optional
        Fixed efficiencies and the starting point for ``p`` and
        ``eta_ret_intrinsic``.
    """

    def __init__(self, observable="retrieval", params=None, p0=None):
        self.observable = observable
        self.params = params
        self.p0 = p0

    def fit(self, X, y, sigma=None):
        self.params_ = self.params or default_paper_params()
        self.result_ = fit_gaussian_decay(_xy_sigma(X, y, sigma), mode=self.observable,
                                          p0=self.p0, params=self.params_)
        self.p_ = self.result_.value("p")
        self.eta_ret_intrinsic_ = self.result_.value("eta_ret_intrinsic")
        self.tau_ = abs(self.result_.value("tau"))
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        model = _storage_model(self.observable, self.params_, DephasingModel.from_tau(self.tau_))
        return model(_x(X), np.array([self.p_, self.eta_ret_intrinsic_, self.tau_]))


class SaturationRegressor(RegressorMixin, BaseEstimator):
    """Internal conversion efficiency against pump power, waveguide length fixed."""

    def __init__(self, length=3.0, p0=None):
        self.length = length
        self.p0 = p0

    def fit(self, X, y, sigma=None):
        self.result_ = fit_saturation(_xy_sigma(X, y, sigma), length=self.length, p0=self.p0)
        self.eta_max_ = self.result_.value("eta_max")
        self.eta_n_ = self.result_.value("eta_n")
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return saturation_curve(_x(X), self.eta_max_, self.eta_n_, self.length)
