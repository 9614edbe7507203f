"""Gaussian-process regression with a squared-exponential ARD kernel.

Inputs live in the normalized unit box. Targets are standardized before
fitting and every public prediction is returned in the original units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import IllConditioned, InvalidArgument
from .search import pattern_search, sobol_starts

SIGNAL_BOUNDS = (1e-8, 1e6)
LENGTH_BOUNDS = (1e-3, 1e3)
NOISE_BOUNDS = (1e-12, 1e3)

JITTER_START = 1e-10
JITTER_MAX = 1e-4

# hyperparameter search starts are drawn from this sub-box of the bounds (log space)
_START_SIGNAL = (0.1, 10.0)
_START_LENGTH = (0.05, 2.0)
_START_NOISE_MAX = 0.1

N_STARTS = 8
_SEARCH_EVALS = 300
_SEARCH_MIN_STEP = 1e-3

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelParams:
    signal_var: float
    lengthscales: tuple
    noise_var: float = 0.0

    def __post_init__(self):
        ls = tuple(float(v) for v in np.ravel(self.lengthscales))
        if self.signal_var <= 0 or any(v <= 0 for v in ls) or self.noise_var < 0:
            raise InvalidArgument(f"invalid kernel parameters {self}")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_var", float(self.signal_var))
        object.__setattr__(self, "noise_var", float(self.noise_var))

    def to_dict(self) -> dict:
        return {"signal_var": self.signal_var, "lengthscales": list(self.lengthscales), "noise_var": self.noise_var}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(d["signal_var"], tuple(d["lengthscales"]), d["noise_var"])


@dataclass(frozen=True, eq=False)
class GpModel:
    """A conditioned GP posterior.

    ``y`` holds standardized targets and ``point_noise`` the per-observation
    noise variance in standardized units; ``y_mean``/``y_std`` undo the
    standardization.
    """

    params: KernelParams
    X: np.ndarray
    y: np.ndarray
    point_noise: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    y_mean: float
    y_std: float
    jitter: float
    noise_pinned: bool = False
    # log marginal likelihood at each hyperparameter search start, empty when not fitted
    start_lml: tuple = ()

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def y_raw(self) -> np.ndarray:
        return self.y * self.y_std + self.y_mean

    def summary(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "n": self.n,
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "log_marginal_likelihood": _lml_from_factor(self.y, self.chol, self.alpha),
        }


def se_kernel(X1, X2, signal_var, lengthscales) -> np.ndarray:
    A = np.asarray(X1, dtype=float) / np.asarray(lengthscales)
    B = np.asarray(X2, dtype=float) / np.asarray(lengthscales)
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return signal_var * np.exp(-0.5 * np.maximum(sq, 0.0))


def _factor(K):
    """Cholesky of ``K + jitter*I`` climbing the jitter ladder."""
    n = len(K)
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return cholesky(K + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditioned(
        f"kernel matrix not positive definite even with jitter {JITTER_MAX:g}; "
        "raise the noise floor or remove duplicate points"
    )


def _lml_from_factor(y, L, alpha) -> float:
    n = len(y)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * _LOG_2PI)


def _regularized(params, X, point_noise):
    K = se_kernel(X, X, params.signal_var, params.lengthscales)
    K[np.diag_indices_from(K)] += params.noise_var + point_noise
    return K


def model_lml(model: GpModel) -> float:
    """Log marginal likelihood of the model's own standardized targets."""
    return _lml_from_factor(model.y, model.chol, model.alpha)


def log_marginal_likelihood(params: KernelParams, X, y, point_noise=None) -> float:
    """Gaussian log evidence of ``y`` under a zero-mean GP with ``params``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y) or len(y) == 0:
        raise InvalidArgument("X and y must be non-empty and of equal length")
    pn = np.zeros(len(y)) if point_noise is None else np.asarray(point_noise, dtype=float)
    L, _ = _factor(_regularized(params, X, pn))
    alpha = cho_solve((L, True), y, check_finite=False)
    return _lml_from_factor(y, L, alpha)


def _standardize(y):
    mean = float(np.mean(y))
    std = float(np.std(y))
    if std < 1e-12:
        std = 1.0
    return mean, std


def condition_on(params: KernelParams, X, y, point_noise=None, *, y_mean=None, y_std=None, noise_pinned=False) -> GpModel:
    """Posterior for fixed ``params``.

    ``y`` and ``point_noise`` are in original units. Standardization
    constants are computed from ``y`` unless given, which lets a caller
    keep them frozen while adding data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y) or len(y) == 0:
        raise InvalidArgument("X and y must be non-empty and of equal length")
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("training targets must be finite")
    if y_mean is None or y_std is None:
        y_mean, y_std = _standardize(y)
    pn = np.zeros(len(y)) if point_noise is None else np.asarray(point_noise, dtype=float) / y_std**2
    ys = (y - y_mean) / y_std
    L, jitter = _factor(_regularized(params, X, pn))
    alpha = cho_solve((L, True), ys, check_finite=False)
    return GpModel(params, X, ys, pn, L, alpha, float(y_mean), float(y_std), jitter, noise_pinned)


def _check_conflicting_duplicates(X, y, tol=1e-12):
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    i, j = np.nonzero(np.triu(d2 <= tol * tol, k=1))
    scale = max(1.0, float(np.max(np.abs(y))))
    for a, b in zip(i, j):
        if abs(y[a] - y[b]) > 1e-12 * scale:
            raise IllConditioned(
                f"training points {a} and {b} coincide but have different targets "
                f"({y[a]!r} vs {y[b]!r}); raise the noise floor above zero"
            )


def fit_gp(X, y, noise_floor: float = 0.0, seed: int = 0, point_noise=None, n_starts: int = N_STARTS) -> GpModel:
    """Fit kernel hyperparameters by maximizing the log marginal likelihood.

    With ``noise_floor == 0`` and no per-point noise the data are taken as
    deterministic: the homoskedastic noise term is pinned at its lower
    bound and the posterior interpolates. Otherwise the noise term is
    searched over ``[max(noise_floor, 1e-12), 1e3]`` (original units).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y) or len(y) == 0:
        raise InvalidArgument("X and y must be non-empty and of equal length")
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("training targets must be finite")
    if noise_floor < 0:
        raise InvalidArgument("noise_floor must be non-negative")
    pn_raw = np.zeros(len(y)) if point_noise is None else np.asarray(point_noise, dtype=float)
    pinned = noise_floor == 0 and not np.any(pn_raw > 0)
    if pinned:
        _check_conflicting_duplicates(X, y)

    y_mean, y_std = _standardize(y)
    ys = (y - y_mean) / y_std
    pn = pn_raw / y_std**2
    d = X.shape[1]

    lo = [math.log(SIGNAL_BOUNDS[0])] + [math.log(LENGTH_BOUNDS[0])] * d
    hi = [math.log(SIGNAL_BOUNDS[1])] + [math.log(LENGTH_BOUNDS[1])] * d
    start_lo = [math.log(_START_SIGNAL[0])] + [math.log(_START_LENGTH[0])] * d
    start_hi = [math.log(_START_SIGNAL[1])] + [math.log(_START_LENGTH[1])] * d
    if not pinned:
        floor = min(max(noise_floor / y_std**2, NOISE_BOUNDS[0]), NOISE_BOUNDS[1])
        lo.append(math.log(floor))
        hi.append(math.log(NOISE_BOUNDS[1]))
        start_lo.append(math.log(floor))
        start_hi.append(math.log(max(floor, _START_NOISE_MAX)))
    lo, hi = np.array(lo), np.array(hi)

    def unpack(theta):
        noise = NOISE_BOUNDS[0] if pinned else math.exp(theta[-1])
        return KernelParams(math.exp(theta[0]), tuple(np.exp(theta[1 : d + 1])), noise)

    def objective(thetas):
        out = np.empty(len(thetas))
        for k, theta in enumerate(thetas):
            try:
                out[k] = log_marginal_likelihood(unpack(theta), X, ys, pn)
            except IllConditioned:
                out[k] = -np.inf
        return out

    starts = sobol_starts(n_starts, start_lo, start_hi, seed)
    res = pattern_search(objective, starts, lo, hi, step=1.0, min_step=_SEARCH_MIN_STEP, max_evals=_SEARCH_EVALS)
    if not np.any(np.isfinite(res.f)):
        raise IllConditioned("no hyperparameter setting gave a positive-definite kernel; raise the noise floor")
    params = unpack(res.x[res.best])
    model = condition_on(params, X, y, pn_raw, y_mean=y_mean, y_std=y_std, noise_pinned=pinned)
    return replace(model, start_lml=tuple(float(v) for v in res.f0))


def predict(model: GpModel, U) -> tuple:
    """Posterior mean and latent variance at rows of ``U``, original units."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != model.dim:
        raise InvalidArgument(f"query dimension {U.shape[1]} does not match model dimension {model.dim}")
    p = model.params
    Ks = se_kernel(U, model.X, p.signal_var, p.lengthscales)
    mean = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = np.maximum(p.signal_var - np.sum(v * v, axis=0), 0.0)
    return mean * model.y_std + model.y_mean, var * model.y_std**2


def gp_predict(model: GpModel, x) -> tuple:
    m, v = predict(model, np.asarray(getattr(x, "coords", x), dtype=float).reshape(1, -1))
    return float(m[0]), float(v[0])


def add_data(model: GpModel, X_new, y_new, point_noise=None) -> GpModel:
    """Condition on extra data keeping hyperparameters and standardization fixed."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    y_new = np.asarray(y_new, dtype=float).ravel()
    pn_new = np.zeros(len(y_new)) if point_noise is None else np.asarray(point_noise, dtype=float)
    X = np.vstack([model.X, X_new])
    y = np.concatenate([model.y_raw, y_new])
    pn = np.concatenate([model.point_noise * model.y_std**2, pn_new])
    return condition_on(model.params, X, y, pn, y_mean=model.y_mean, y_std=model.y_std, noise_pinned=model.noise_pinned)


def with_params(model: GpModel, params: KernelParams) -> GpModel:
    return condition_on(params, model.X, model.y_raw, model.point_noise * model.y_std**2,
                        y_mean=model.y_mean, y_std=model.y_std, noise_pinned=model.noise_pinned)


__all__ = [
    "KernelParams",
    "GpModel",
    "se_kernel",
    "log_marginal_likelihood",
    "model_lml",
    "condition_on",
    "fit_gp",
    "predict",
    "gp_predict",
    "add_data",
    "with_params",
]
