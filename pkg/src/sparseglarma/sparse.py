"""Quadratic approximation of the likelihood and the l1-penalized solver.

Variable selection on the regression block works on a local quadratic
model of the log-likelihood in beta, taken at the GLM start values with
the feedback coefficients fixed at their Newton estimates. Writing A for
the negated beta-block Hessian and s for the beta-block score at the
expansion point b0, the second-order Taylor model of -L is (up to a
constant)

    0.5 * (beta - b0)' A (beta - b0) - s' (beta - b0),

which after the symmetric eigendecomposition A = U diag(lam) U' becomes an
ordinary least-squares objective 0.5 * ||yv - xd @ beta||^2 with

    xd = diag(sqrt(lam)) U',
    yv = xd @ b0 + diag(1/sqrt(lam)) U' s.

The unpenalized minimizer of this least-squares problem is exactly the
Newton step b0 + A^{-1} s, which pins down the sign of the gradient term.
A should be positive semidefinite but can pick up small negative
eigenvalues at finite samples, so eigenvalues below a floor are raised to
it (and the count reported) before the inverse square root is formed.

The l1 path solver is plain cyclic coordinate descent with warm starts
down a decreasing penalty grid; every coordinate is penalized by default,
including the intercept, with an opt-out flag for comparison runs.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import cd_lasso
from .derivatives import score_and_hessian
from .errors import (
    DegenerateProblem,
    EigenFailure,
    InputError,
    NoConvergence,
)
from .model import Dataset, GlarmaParams

CD_TOL = 1e-8
CD_MAX_SWEEPS = 10_000
# sweeps between attempts to finish a stalled problem by an exact
# active-set solve (ill-conditioned dense path points crawl otherwise)
_CD_STALL_CHUNK = 200


def _active_set_refine(design, response, lam, penalized, beta, resid):
    """Finish a stalled problem by an exact working-set solve.

    On a fixed active set with fixed signs the l1 optimality conditions
    are linear: design_A'(response - design_A b) = lam * sign_A for
    penalized coordinates, zero for unpenalized ones. Starting from the
    coordinate-descent iterate, coordinates whose solved sign contradicts
    the assumption are dropped, the worst inactive violator is added, and
    the system is re-solved until the full optimality conditions certify a
    global optimum (the problem is convex, so the certificate is
    sufficient). On success the coefficients and residual are replaced
    wholesale and True is returned; any inconsistency gives False and
    coordinate descent simply continues.
    """
    nrows, p = design.shape
    active = (beta != 0.0) | (~penalized)
    signs = np.sign(beta)
    current = beta.copy()
    barred = np.zeros(p, dtype=bool)
    xty = design.T @ response
    slack = 1e-9 * max(lam, 1.0)
    for _ in range(4 * p + 50):
        idx = np.flatnonzero(active)
        if idx.size == 0 or idx.size > nrows:
            return False
        sub = design[:, idx]
        gram = sub.T @ sub
        rhs = xty[idx] - lam * signs[idx] * penalized[idx]
        try:
            cand = np.linalg.solve(gram, rhs)
            # two refinement passes keep the stationarity residual at the
            # rounding floor even when the gram matrix is ill-conditioned
            for _twice in range(2):
                cand += np.linalg.solve(gram, rhs - gram @ cand)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(cand)):
            return False
        cur = current[idx]
        flips = penalized[idx] & (np.sign(cand) != signs[idx])
        if np.any(flips):
            # ratio test: walk toward the candidate only up to the first
            # sign crossing, zero that coordinate, and re-solve; descent
            # along the segment makes the whole loop monotone
            denom = cur - cand
            steps = np.full(idx.size, np.inf)
            ok = flips & (np.abs(denom) > 0)
            steps[ok] = cur[ok] / denom[ok]
            a = float(np.min(steps))
            if not np.isfinite(a) or a >= 1.0:
                return False
            if a <= 0.0:
                # an entering coordinate immediately flips back: bar it
                dead = flips & (steps <= 0.0)
                active[idx[dead]] = False
                barred[idx[dead]] = True
                current[idx[dead]] = 0.0
                continue
            moved = cur + a * (cand - cur)
            crossed = steps <= a
            moved[crossed] = 0.0
            current[idx] = moved
            active[idx[crossed]] = False
            continue
        current[idx] = cand
        new_resid = response - sub @ cand
        corr = design.T @ new_resid
        scores = np.where(active | barred, -np.inf, np.abs(corr) - lam)
        worst = int(np.argmax(scores))
        if scores[worst] > slack:
            active[worst] = True
            signs[worst] = np.sign(corr[worst])
            continue
        if np.any(barred) and np.any(
            np.abs(corr[barred]) > lam + slack
        ):
            # a coordinate we had to bar is genuinely needed: give up and
            # let coordinate descent keep working
            return False
        beta[:] = 0.0
        beta[idx] = cand
        resid[:] = new_resid
        return True
    return False


def _cd_converge(design, response, lam, penalized, beta, resid, col_norms,
                 tol, max_sweeps, obj_trace):
    """Run the coordinate-descent kernel, rescuing stalls via refinement."""
    used = 0
    while used < max_sweeps:
        chunk = min(_CD_STALL_CHUNK, max_sweeps - used)
        sweeps = cd_lasso(
            design, response, lam, penalized, beta, resid, col_norms,
            tol, chunk, obj_trace,
        )
        if sweeps >= 0:
            return used + sweeps
        used += chunk
        _active_set_refine(design, response, lam, penalized, beta, resid)
    return -1


@dataclass
class QuadraticProblem:
    """Least-squares form of the local quadratic model.

    design' @ design reconstructs the (eigenvalue-floored) negated
    beta-block Hessian; eigvals are stored nonincreasing and clipped_count
    says how many were raised to the floor.
    """

    response: np.ndarray
    design: np.ndarray
    eigvals: np.ndarray
    clipped_count: int


@dataclass
class LassoPath:
    """Solutions along a decreasing penalty grid.

    coefs[k] solves the l1 problem at lambdas[k]; objective[k] is the
    penalized objective value at that solution.
    """

    lambdas: np.ndarray
    coefs: np.ndarray
    objective: np.ndarray


def build_quadratic(
    data: Dataset, beta_tilde: np.ndarray, gamma_hat: np.ndarray
) -> QuadraticProblem:
    """Assemble the transformed least-squares problem at (beta_tilde, gamma_hat)."""
    beta_tilde = np.atleast_1d(np.asarray(beta_tilde, dtype=np.float64))
    gamma_hat = np.atleast_1d(np.asarray(gamma_hat, dtype=np.float64))
    if beta_tilde.size != data.x.shape[1]:
        raise InputError("beta_tilde length does not match data columns")
    params = GlarmaParams(beta=beta_tilde, gamma=gamma_hat)
    p1 = beta_tilde.size
    s_full, h_full = score_and_hessian(params, data)
    s_beta = s_full[:p1]
    neg_h = -h_full[:p1, :p1]
    try:
        eigvals, eigvecs = np.linalg.eigh(neg_h)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("symmetric eigendecomposition failed") from exc
    # reorder nonincreasing (eigh returns ascending)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    floor = 1e-8 * max(float(np.max(np.abs(eigvals))), 1.0)
    clipped = int(np.sum(eigvals < floor))
    eigvals = np.maximum(eigvals, floor)
    root = np.sqrt(eigvals)
    design = root[:, None] * eigvecs.T
    response = design @ beta_tilde + (eigvecs.T @ s_beta) / root
    return QuadraticProblem(
        response=response, design=design, eigvals=eigvals, clipped_count=clipped
    )


def lambda_grid(
    problem: QuadraticProblem, K: int = 100, ratio: float = 1e-4
) -> np.ndarray:
    """Log-spaced penalty grid from lambda_max down to ratio * lambda_max.

    lambda_max = ||design' response||_inf is the smallest penalty whose
    solution is identically zero (with every coordinate penalized).
    """
    if K < 2:
        raise InputError("K must be at least 2")
    if not (0.0 < ratio < 1.0):
        raise InputError("ratio must lie strictly between 0 and 1")
    corr = problem.design.T @ problem.response
    lam_max = float(np.max(np.abs(corr)))
    if lam_max == 0.0:
        raise DegenerateProblem("design' @ response is identically zero")
    return np.geomspace(lam_max, ratio * lam_max, K)


def solve_at_lambda(
    design: np.ndarray,
    response: np.ndarray,
    lam: float,
    beta0: np.ndarray = None,
    penalize_intercept: bool = True,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
    return_trace: bool = False,
):
    """Coordinate descent at a single penalty; building block of the path.

    Returns (beta, sweeps) or (beta, sweeps, objective_trace). Raises
    :class:`NoConvergence` when the sweep budget runs out.
    """
    n, p = design.shape
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    resid = response - design @ beta
    col_norms = np.einsum("ij,ij->j", design, design)
    penalized = np.ones(p, dtype=np.bool_)
    if not penalize_intercept:
        penalized[0] = False
    if return_trace:
        # diagnostic mode: plain kernel, no stall rescue, per-sweep objective
        trace = np.empty(max_sweeps)
        sweeps = cd_lasso(
            design, response.astype(np.float64), float(lam), penalized, beta,
            resid, col_norms, tol, max_sweeps, trace,
        )
        if sweeps < 0:
            raise NoConvergence(float(lam), max_sweeps)
        return beta, sweeps, trace[:sweeps].copy()
    sweeps = _cd_converge(
        design, response.astype(np.float64), float(lam), penalized, beta,
        resid, col_norms, tol, max_sweeps, np.empty(0),
    )
    if sweeps < 0:
        raise NoConvergence(float(lam), max_sweeps)
    return beta, sweeps


def lasso_solve(
    problem: QuadraticProblem,
    lambdas: np.ndarray,
    penalize_intercept: bool = True,
) -> LassoPath:
    """Solve the l1 problem along a decreasing grid with warm starts.

    Convergence at each penalty means the largest absolute coefficient
    change within a full sweep fell below 1e-8; exceeding 10 000 sweeps
    raises :class:`NoConvergence` naming the offending penalty.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise InputError("lambdas must be a nonempty 1-d vector")
    if np.any(lambdas <= 0):
        raise InputError("lambdas must be positive")
    if lambdas.size > 1 and np.any(np.diff(lambdas) >= 0):
        raise InputError("lambdas must be strictly decreasing")
    design = problem.design
    response = problem.response
    n, p = design.shape
    coefs = np.zeros((lambdas.size, p))
    objective = np.zeros(lambdas.size)
    beta = np.zeros(p)
    resid = response.astype(np.float64).copy()
    col_norms = np.einsum("ij,ij->j", design, design)
    penalized = np.ones(p, dtype=np.bool_)
    if not penalize_intercept:
        penalized[0] = False
    no_trace = np.empty(0)
    response64 = response.astype(np.float64)
    for k, lam in enumerate(lambdas):
        sweeps = _cd_converge(
            design, response64, float(lam), penalized, beta,
            resid, col_norms, CD_TOL, CD_MAX_SWEEPS, no_trace,
        )
        if sweeps < 0:
            raise NoConvergence(float(lam), CD_MAX_SWEEPS, context=f"path index {k}")
        coefs[k] = beta
        pen = np.sum(np.abs(beta[penalized]))
        objective[k] = 0.5 * float(resid @ resid) + lam * pen
    return LassoPath(lambdas=lambdas, coefs=coefs, objective=objective)


def kkt_gap(problem: QuadraticProblem, beta: np.ndarray, lam: float) -> float:
    """Largest violation of the l1 optimality conditions at ``beta``.

    Zero (up to solver tolerance) certifies optimality: the correlation
    design'(response - design beta) must stay within [-lam, lam]
    everywhere and sit exactly at +/- lam with matching sign on the active
    coordinates.
    """
    corr = problem.design.T @ (problem.response - problem.design @ beta)
    gap = float(np.max(np.maximum(np.abs(corr) - lam, 0.0)))
    active = beta != 0
    if np.any(active):
        gap = max(
            gap,
            float(np.max(np.abs(corr[active] - lam * np.sign(beta[active])))),
        )
    return gap
