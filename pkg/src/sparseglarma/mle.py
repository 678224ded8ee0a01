"""Maximum-likelihood estimation: GLM start, Newton-Raphson, profile fit.

The fitting procedure is two-staged. A plain Poisson GLM (log link) fitted
by iteratively reweighted least squares supplies the regression start
values while ignoring the residual feedback entirely; Newton-Raphson then
maximizes the full conditional log-likelihood over the joint parameter
vector, starting the feedback block at zero. The iteration stops when the
sup-norm change of the parameter vector falls below ``tol``.

Plain Newton can diverge on unlucky samples, so each step is backtracked:
if the likelihood does not improve, the step is halved (up to 30 times)
before giving up. Near the optimum the full step always ascends, so the
safeguard leaves the pure Newton recursion untouched where it matters.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .derivatives import score, score_and_hessian
from .errors import (
    DegenerateCounts,
    EmptyGrid,
    InputError,
    LikelihoodOverflow,
    NotIdentifiable,
    OverflowGuard,
    SingularDesign,
    SingularHessian,
)
from .model import Dataset, GlarmaParams, log_likelihood

_MAX_HALVINGS = 30
_RIDGE_COND_LIMIT = 1e12


@dataclass
class FitResult:
    """Outcome of a Newton-Raphson fit."""

    delta_hat: GlarmaParams
    loglik: float
    iterations: int
    grad_inf_norm: float
    converged: bool
    step_halvings_total: int
    trace: List[dict] = field(default_factory=list, repr=False)


def glm_poisson_init(data: Dataset, tol: float = 1e-8, max_iter: int = 25) -> np.ndarray:
    """Poisson GLM coefficients (log link), ignoring the feedback part.

    Fitted by iteratively reweighted least squares until the score sup-norm
    drops below ``tol`` or ``max_iter`` passes. This is the first-stage
    start value for the full fit.
    """
    n, p1 = data.x.shape
    if p1 > n:
        raise NotIdentifiable(f"{p1} regression parameters but only {n} observations")
    y = data.y.astype(np.float64)
    if not np.any(y > 0):
        raise DegenerateCounts("all counts are zero; the Poisson MLE does not exist")
    beta = np.zeros(p1)
    beta[0] = np.log(y.mean())
    x = data.x
    for _ in range(max_iter):
        eta = np.clip(x @ beta, -30.0, 30.0)
        mu = np.exp(eta)
        grad = x.T @ (y - mu)
        if np.max(np.abs(grad)) < tol:
            break
        # canonical link: IRLS step == Newton step with weights mu
        xw = x * mu[:, None]
        info = x.T @ xw
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularDesign("weighted normal equations are singular") from exc
        if not np.all(np.isfinite(step)):
            raise SingularDesign("IRLS step is not finite")
        beta = beta + step
    return beta


def _solve_newton_system(h: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Newton step h @ step = s, damped just enough to point uphill.

    Far from the maximum the Hessian can be indefinite or near-singular, in
    which case the raw Newton direction -step may point downhill and no
    amount of step-halving helps. Subtracting tau*I (the Hessian is
    negative definite at the maximum, so the ridge goes on that side) and
    escalating tau until -step has positive inner product with the score
    restores an ascent direction while leaving the pure Newton step
    untouched whenever it already ascends.
    """
    if not np.any(s):
        return np.zeros_like(s)  # already stationary
    diag_scale = max(np.max(np.abs(np.diag(h))), 1.0)
    eye = np.eye(h.shape[0])
    tau = 0.0
    for _ in range(60):
        h_reg = h if tau == 0.0 else h - tau * eye
        try:
            ill = np.linalg.cond(h_reg) > _RIDGE_COND_LIMIT
        except np.linalg.LinAlgError:
            ill = True
        if not ill:
            step = np.linalg.solve(h_reg, s)
            if np.all(np.isfinite(step)) and -float(s @ step) > 0.0:
                return step
        tau = 1e-8 * diag_scale if tau == 0.0 else tau * 32.0
    raise SingularHessian(
        "could not produce an ascent direction from the Newton system"
    )


def newton_raphson_fit(
    data: Dataset,
    q: int,
    init: Optional[GlarmaParams] = None,
    tol: float = 1e-6,
    max_iter: int = 100,
    keep_trace: bool = False,
) -> FitResult:
    """Maximize the conditional log-likelihood by safeguarded Newton-Raphson.

    ``init`` defaults to the GLM coefficients with a zero feedback block.
    Accepted iterates never decrease the likelihood; the number of step
    halvings used is reported in the result. ``converged`` is True exactly
    when the sup-norm parameter change fell below ``tol`` within
    ``max_iter`` iterations.
    """
    if q < 1:
        raise InputError("q must be at least 1")
    if data.x.shape[1] + q > data.n:
        raise NotIdentifiable(
            f"{data.x.shape[1] + q} parameters but only {data.n} observations"
        )
    if init is None:
        init = GlarmaParams(beta=glm_poisson_init(data), gamma=np.zeros(q))
    if init.q != q:
        raise InputError(f"init has gamma length {init.q}, expected {q}")

    delta = init.delta
    try:
        loglik = log_likelihood(GlarmaParams.from_delta(delta, q), data)
    except OverflowGuard as exc:
        raise LikelihoodOverflow(
            f"initial iterate overflows the recursion: {exc}", iterate=delta.copy()
        ) from exc

    converged = False
    halvings_total = 0
    iterations = 0
    trace: List[dict] = []
    for _ in range(max_iter):
        params = GlarmaParams.from_delta(delta, q)
        s, h = score_and_hessian(params, data)
        step = _solve_newton_system(h, s)
        # full Newton update is delta - H^{-1} s; alpha scales the step
        alpha = 1.0
        accepted = None
        for _halve in range(_MAX_HALVINGS + 1):
            cand = delta - alpha * step
            try:
                cand_ll = log_likelihood(GlarmaParams.from_delta(cand, q), data)
            except OverflowGuard:
                cand_ll = -np.inf
            if cand_ll >= loglik:
                accepted = (cand, cand_ll)
                break
            alpha *= 0.5
            halvings_total += 1
        if accepted is None:
            break  # no ascent direction left: report converged=False
        new_delta, new_ll = accepted
        change = float(np.max(np.abs(new_delta - delta)))
        iterations += 1
        if keep_trace:
            trace.append(
                {
                    "iteration": iterations,
                    "loglik": new_ll,
                    "step_inf_norm": change,
                    "halvings": int(round(np.log2(1.0 / alpha))) if alpha < 1 else 0,
                }
            )
        delta, loglik = new_delta, new_ll
        if change < tol:
            converged = True
            break

    params_hat = GlarmaParams.from_delta(delta, q)
    grad = score(params_hat, data)
    return FitResult(
        delta_hat=params_hat,
        loglik=loglik,
        iterations=iterations,
        grad_inf_norm=float(np.max(np.abs(grad))),
        converged=converged,
        step_halvings_total=halvings_total,
        trace=trace,
    )


def newton_beta_fit(
    data: Dataset,
    gamma: np.ndarray,
    init_beta: Optional[np.ndarray] = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> FitResult:
    """Maximize the likelihood over the regression block at fixed feedback.

    Same safeguarded Newton iteration as :func:`newton_raphson_fit`, but
    only the beta block moves; used when the feedback coefficients are
    known (or pinned) rather than estimated.
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    q = gamma.size
    p1 = data.x.shape[1]
    if p1 > data.n:
        raise NotIdentifiable(f"{p1} parameters but only {data.n} observations")
    beta = glm_poisson_init(data) if init_beta is None else np.array(
        init_beta, dtype=np.float64
    )

    def ll(b):
        return log_likelihood(GlarmaParams(beta=b, gamma=gamma), data)

    try:
        loglik = ll(beta)
    except OverflowGuard as exc:
        raise LikelihoodOverflow(
            f"initial iterate overflows the recursion: {exc}", iterate=beta.copy()
        ) from exc
    converged = False
    halvings_total = 0
    iterations = 0
    for _ in range(max_iter):
        s, h = score_and_hessian(GlarmaParams(beta=beta, gamma=gamma), data)
        step = _solve_newton_system(h[:p1, :p1], s[:p1])
        alpha = 1.0
        accepted = None
        for _halve in range(_MAX_HALVINGS + 1):
            cand = beta - alpha * step
            try:
                cand_ll = ll(cand)
            except OverflowGuard:
                cand_ll = -np.inf
            if cand_ll >= loglik:
                accepted = (cand, cand_ll)
                break
            alpha *= 0.5
            halvings_total += 1
        if accepted is None:
            break
        new_beta, new_ll = accepted
        change = float(np.max(np.abs(new_beta - beta)))
        iterations += 1
        beta, loglik = new_beta, new_ll
        if change < tol:
            converged = True
            break
    params_hat = GlarmaParams(beta=beta, gamma=gamma)
    grad = score(params_hat, data)
    return FitResult(
        delta_hat=params_hat,
        loglik=loglik,
        iterations=iterations,
        grad_inf_norm=float(np.max(np.abs(grad[:p1]))),
        converged=converged,
        step_halvings_total=halvings_total,
    )


def profile_gamma1_fit(
    data: Dataset,
    beta0_star: float,
    grid: Tuple[float, float, float],
) -> float:
    """Maximize the likelihood over the single feedback coefficient.

    The regression part is held fixed at the known intercept ``beta0_star``
    (the data must be intercept-only). The maximizer is located on the grid
    ``(lo, hi, step)`` and then refined by one golden-section pass inside
    the best grid cell. Used to exhibit the consistency of this profile
    estimator on simulated data.
    """
    if data.p != 0:
        raise InputError("profile fit requires intercept-only data (p = 0)")
    lo, hi, step = grid
    if step <= 0 or hi < lo:
        raise EmptyGrid(f"invalid grid ({lo}, {hi}, {step})")
    points = np.arange(lo, hi + step * 0.5, step)
    if points.size == 0:
        raise EmptyGrid(f"grid ({lo}, {hi}, {step}) contains no points")

    def objective(g1: float) -> float:
        try:
            return log_likelihood(
                GlarmaParams(beta=[beta0_star], gamma=[g1]), data
            )
        except OverflowGuard:
            return -np.inf

    values = np.array([objective(g) for g in points])
    best = int(np.argmax(values))
    if points.size == 1:
        return float(points[0])

    # golden-section refinement inside the winning cell
    a = points[max(best - 1, 0)]
    b = points[min(best + 1, points.size - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > 1e-6:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    x_ref = 0.5 * (a + b)
    # keep whichever of grid winner / refined point scores higher
    if objective(x_ref) >= values[best]:
        return float(x_ref)
    return float(points[best])
