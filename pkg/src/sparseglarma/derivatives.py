"""Exact recursive derivatives of the log mean, score and Hessian.

The log mean w_t depends on (beta, gamma) both directly and through the
fed-back residuals, so its derivatives satisfy the same kind of recursion
as w_t itself. Writing d for p+1+q and g_t = dw_t/d(beta, gamma):

    g_t = (x_t, e_{t-1}, ..., e_{t-q})  -  sum_j gamma_j (1+e_{t-j}) g_{t-j}

and the symmetric second-derivative matrix s_t of w_t obeys

    s_t = a_t + sum_j gamma_j (1+e_{t-j}) (g_{t-j} g_{t-j}' - s_{t-j}),

where a_t collects the cross terms from differentiating the residual
inside each feedback lag: a_t is zero on the beta-beta block and
subtracts (1+e_{t-l}) g_{t-l} symmetrically into the row/column of
gamma_l. Terms indexed before the sample start contribute zero.

From these, the score and Hessian of the log-likelihood L are

    score   = sum_t (y_t - mu_t) g_t
    hessian = sum_t (y_t - mu_t) s_t - sum_t mu_t g_t g_t'

The Hessian is assembled in exactly symmetric form (the recursion keeps
each s_t symmetric to the last bit; the outer-product term is mirrored
from its computed upper triangle), so ``hessian(...) == hessian(...).T``
holds without any averaging step.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import grad_recursion, hess_accumulate
from .errors import InputError
from .model import Dataset, FilterOutput, GlarmaParams, forward_filter


@dataclass
class PredictorDerivatives:
    """Derivatives of the log mean w_t, one row/slice per time step.

    grad has shape (n, p+1+q) with the beta block first; hess, present when
    order=2 was requested, has shape (n, d, d) with exactly symmetric
    slices.
    """

    grad: np.ndarray
    hess: Optional[np.ndarray]


def predictor_derivatives(
    params: GlarmaParams, data: Dataset, order: int = 1
) -> PredictorDerivatives:
    """First (and optionally second) derivatives of w_t at every t.

    order=1 fills only the gradient rows; order=2 also materializes the
    full (n, d, d) second-derivative tensor. The materialized form exists
    for testing and inspection; the Hessian of L is accumulated in a
    streaming fashion by :func:`hessian` and never builds this tensor.
    """
    if order not in (1, 2):
        raise InputError("order must be 1 or 2")
    out = forward_filter(params, data)
    g = grad_recursion(data.x, params.gamma, out.e)
    hess = None
    if order == 2:
        n = data.n
        d = g.shape[1]
        slices = np.zeros((n, d, d))
        hess_accumulate(
            data.y.astype(np.float64), data.x, params.gamma, out.e, out.mu,
            g, slices,
        )
        hess = slices
    return PredictorDerivatives(grad=g, hess=hess)


def _grad_with_filter(params: GlarmaParams, data: Dataset):
    out = forward_filter(params, data)
    g = grad_recursion(data.x, params.gamma, out.e)
    return out, g

def score(params: GlarmaParams, data: Dataset) -> np.ndarray:
    """Gradient of the log-likelihood, sum_t (y_t - mu_t) dw_t/d(beta,gamma)."""
    out, g = _grad_with_filter(params, data)
    return (data.y - out.mu) @ g


def hessian(params: GlarmaParams, data: Dataset) -> np.ndarray:
    """Hessian of the log-likelihood; exactly symmetric by construction."""
    out, g = _grad_with_filter(params, data)
    return _hessian_from_parts(params, data, out, g)


def score_and_hessian(params: GlarmaParams, data: Dataset):
    """Score and Hessian from one shared filter/gradient pass."""
    out, g = _grad_with_filter(params, data)
    s = (data.y - out.mu) @ g
    return s, _hessian_from_parts(params, data, out, g)


def _hessian_from_parts(
    params: GlarmaParams, data: Dataset, out: FilterOutput, g: np.ndarray
) -> np.ndarray:
    q = params.q
    d = g.shape[1]
    # ring buffer: only the last q second-derivative slices are ever needed
    slices = np.zeros((q + 1, d, d))
    curvature = hess_accumulate(
        data.y.astype(np.float64), data.x, params.gamma, out.e, out.mu,
        g, slices,
    )
    m = g * np.sqrt(out.mu)[:, None]
    outer = m.T @ m
    # mirror the computed upper triangle so symmetry is exact, not averaged
    outer = np.triu(outer) + np.triu(outer, 1).T
    return curvature - outer
