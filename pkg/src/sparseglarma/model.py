"""Poisson GLARMA model: data containers, forward recursion, simulator.

The observation model is a Poisson count whose log mean is a linear
predictor plus a moving-average combination of past scaled (working)
residuals:

    Y_t | past  ~  Poisson(mu_t),     mu_t = exp(w_t),
    w_t = beta . x_t + sum_{j=1..q} gamma_j * e_{t-j},
    e_t = Y_t * exp(-w_t) - 1,        e_t = 0 before the sample starts.

``forward_filter`` evaluates the recursion for given parameters on observed
data, ``log_likelihood`` is the conditional Poisson log-likelihood
sum_t (y_t * w_t - mu_t), and ``simulate`` draws a series from the
generative model.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import filter_recursion
from .errors import InputError, OverflowGuard

#: Abort threshold for |w_t|. exp(30) ~ 1.07e13 is far beyond any realistic
#: count mean, so crossing it means the recursion is numerically explosive.
W_CLAMP = 30.0


@dataclass
class GlarmaParams:
    """Full parameter vector: regression block then feedback block.

    beta[0] is the intercept; gamma[j-1] weights the working residual at
    lag j. Both blocks must be nonempty and finite.
    """

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=np.float64))
        if self.beta.ndim != 1 or self.beta.size < 1:
            raise InputError("beta must be a nonempty 1-d vector")
        if self.gamma.ndim != 1 or self.gamma.size < 1:
            raise InputError("gamma must be a nonempty 1-d vector")
        if not np.all(np.isfinite(self.beta)):
            raise InputError("beta contains non-finite entries")
        if not np.all(np.isfinite(self.gamma)):
            raise InputError("gamma contains non-finite entries")

    @property
    def q(self) -> int:
        return self.gamma.size

    @property
    def delta(self) -> np.ndarray:
        """Concatenated (beta, gamma) vector."""
        return np.concatenate([self.beta, self.gamma])

    @classmethod
    def from_delta(cls, delta: np.ndarray, q: int) -> "GlarmaParams":
        delta = np.asarray(delta, dtype=np.float64)
        return cls(beta=delta[: delta.size - q], gamma=delta[delta.size - q:])


@dataclass
class Dataset:
    """Observed counts plus covariate matrix with a leading intercept column.

    ``x`` has one row per time step and p+1 columns whose first column is
    identically 1. Raw files carry only the p non-intercept covariates;
    use :meth:`from_covariates` (or the CSV reader) to add the column.
    """

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1 or y.size < 1:
            raise InputError("y must be a nonempty 1-d vector of counts")
        yf = np.asarray(y, dtype=np.float64)
        if not np.all(np.isfinite(yf)):
            raise InputError("y contains non-finite entries")
        if np.any(yf < 0) or np.any(yf != np.floor(yf)):
            bad = int(np.flatnonzero((yf < 0) | (yf != np.floor(yf)))[0])
            raise InputError(
                f"y must hold nonnegative integers; offending row {bad + 1}"
            )
        self.y = yf.astype(np.int64)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != self.y.size:
            raise InputError("x must be an n-by-(p+1) matrix aligned with y")
        if not np.all(np.isfinite(x)):
            raise InputError("x contains non-finite entries")
        if not np.all(x[:, 0] == 1.0):
            raise InputError("column 0 of x must be identically 1 (intercept)")
        self.x = x

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1] - 1

    @classmethod
    def from_covariates(cls, y, covariates=None) -> "Dataset":
        """Build a dataset from counts and raw (intercept-free) covariates.

        ``covariates`` may be None or an n-by-0 array for an intercept-only
        model. The intercept column is always prepended here so callers can
        never end up with a doubled intercept.
        """
        y = np.atleast_1d(np.asarray(y))
        n = y.shape[0]
        if covariates is None:
            x = np.ones((n, 1))
        else:
            cov = np.asarray(covariates, dtype=np.float64)
            if cov.ndim == 1:
                cov = cov.reshape(-1, 1)
            if cov.shape[0] != n:
                raise InputError("covariates must have one row per count")
            x = np.hstack([np.ones((n, 1)), cov])
        return cls(y=y, x=x)


@dataclass
class FilterOutput:
    """Per-time-step series produced by the forward recursion.

    w is the log mean, z the residual-feedback part of w, e the working
    residual (y/mu - 1), and mu = exp(w) the conditional mean.
    """

    w: np.ndarray
    z: np.ndarray
    e: np.ndarray
    mu: np.ndarray


def _check_dims(params: GlarmaParams, data: Dataset) -> None:
    if params.beta.size != data.x.shape[1]:
        raise InputError(
            f"beta has length {params.beta.size} but data has "
            f"{data.x.shape[1]} columns (including intercept)"
        )


def forward_filter(params: GlarmaParams, data: Dataset) -> FilterOutput:
    """Run the log-mean recursion for given parameters on observed data.

    Deterministic, O(n*q). Raises :class:`OverflowGuard` when any |w_t|
    exceeds ``W_CLAMP``.
    """
    _check_dims(params, data)
    w, z, e, mu, bad = filter_recursion(
        data.y.astype(np.float64), data.x, params.beta, params.gamma, W_CLAMP
    )
    if bad >= 0:
        raise OverflowGuard(bad, float(w[bad]))
    return FilterOutput(w=w, z=z, e=e, mu=mu)


def log_likelihood(params: GlarmaParams, data: Dataset) -> float:
    """Conditional Poisson log-likelihood sum_t (y_t w_t - mu_t)."""
    out = forward_filter(params, data)
    return float(np.dot(data.y, out.w) - np.sum(out.mu))


def simulate(params: GlarmaParams, covariates: np.ndarray, seed: int) -> Dataset:
    """Draw a count series from the generative model.

    ``covariates`` is the full n-by-(p+1) matrix including the intercept
    column. Counts are drawn sequentially: at each step the log mean is
    formed from the previous residuals, a Poisson variate is drawn, and the
    new working residual is fed back.

    Randomness is pinned down completely by ``seed``: the generator is
    numpy's PCG64 and Poisson variates come from numpy's standard sampler
    (repeated-uniform products below mean 10, the PTRS transformed
    rejection method above), so identical seeds reproduce identical series.

    The per-step arithmetic deliberately mirrors the filter kernel
    (summation order, libm exp), so running :func:`forward_filter` with
    the same parameters on the returned dataset reproduces the simulated
    trajectory bit for bit.
    """
    x = np.asarray(covariates, dtype=np.float64)
    if x.ndim != 2:
        raise InputError("covariates must be a 2-d matrix")
    if not np.all(x[:, 0] == 1.0):
        raise InputError("column 0 of covariates must be identically 1")
    if params.beta.size != x.shape[1]:
        raise InputError("beta length does not match covariate columns")
    n, p1 = x.shape
    q = params.q
    beta, gamma = params.beta, params.gamma
    rng = np.random.Generator(np.random.PCG64(seed))
    e = np.zeros(n)
    y = np.zeros(n, dtype=np.int64)
    for t in range(n):
        wt = 0.0
        for j in range(1, min(q, t) + 1):
            wt += gamma[j - 1] * e[t - j]
        for k in range(p1):
            wt += beta[k] * x[t, k]
        if not (-W_CLAMP <= wt <= W_CLAMP):
            raise OverflowGuard(t, float(wt))
        y[t] = rng.poisson(math.exp(wt))
        e[t] = y[t] * math.exp(-wt) - 1.0
    return Dataset(y=y, x=x)
