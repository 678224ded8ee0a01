import numpy as np
import pytest

from sparseglarma import (
    Dataset,
    DegenerateProblem,
    GlarmaParams,
    InputError,
    NoConvergence,
    QuadraticProblem,
    build_quadratic,
    glm_poisson_init,
    hessian,
    kkt_gap,
    lambda_grid,
    lasso_solve,
    newton_raphson_fit,
    score,
    simulate,
    solve_at_lambda,
)


def _toy_problem(rng, n=12, scale=1.0, seed=None):
    """Unit-scale synthetic least-squares problem for solver oracles."""
    design = rng.normal(size=(n, n)) * scale
    response = rng.normal(size=n)
    eig = np.linalg.eigvalsh(design.T @ design)[::-1]
    return QuadraticProblem(
        response=response, design=design, eigvals=eig, clipped_count=0
    )


@pytest.fixture(scope="module")
def fitted_problem():
    rng = np.random.default_rng(31)
    x = np.hstack([np.ones((150, 1)), rng.uniform(-1, 1, size=(150, 3))])
    truth = GlarmaParams(beta=[1.0, 0.6, -0.4, 0.2], gamma=[0.3])
    data = simulate(truth, x, seed=9)
    fit = newton_raphson_fit(data, q=1)
    problem = build_quadratic(data, fit.delta_hat.beta, fit.delta_hat.gamma)
    return data, fit, problem


def test_scalar_newton_step_identity(rng):
    data = Dataset.from_covariates(rng.poisson(4.0, size=80))
    beta_tilde = np.array([1.2])
    gamma_hat = np.array([0.2])
    problem = build_quadratic(data, beta_tilde, gamma_hat)
    params = GlarmaParams(beta=beta_tilde, gamma=gamma_hat)
    s = score(params, data)[0]
    h = -hessian(params, data)[0, 0]
    argmin = problem.response[0] / problem.design[0, 0]
    assert argmin == pytest.approx(beta_tilde[0] + s / h, abs=1e-10)


def test_zero_score_keeps_expansion_point():
    # constant counts at the exact MLE: score vanishes, so the
    # unpenalized minimizer is the expansion point itself
    data = Dataset.from_covariates([6] * 120)
    beta_tilde = np.array([np.log(6.0)])
    problem = build_quadratic(data, beta_tilde, np.zeros(1))
    sol = np.linalg.solve(problem.design, problem.response)
    assert sol[0] == pytest.approx(beta_tilde[0], abs=1e-12)


def test_quadratic_gradient_and_curvature(fitted_problem):
    data, fit, problem = fitted_problem
    p1 = data.x.shape[1]
    beta_tilde = fit.delta_hat.beta
    s_beta = score(fit.delta_hat, data)[:p1]
    neg_h = -hessian(fit.delta_hat, data)[:p1, :p1]
    # gradient of 0.5||Y - X b||^2 at the expansion point equals -score
    grad = problem.design.T @ (problem.design @ beta_tilde - problem.response)
    scale = max(1.0, np.max(np.abs(s_beta)))
    assert np.max(np.abs(grad + s_beta)) / scale < 1e-8
    # curvature reconstructs the (unclipped) negated regression Hessian
    assert problem.clipped_count == 0
    recon = problem.design.T @ problem.design
    rel = np.linalg.norm(recon - neg_h) / np.linalg.norm(neg_h)
    assert rel < 1e-10


def test_taylor_fidelity(fitted_problem, rng):
    data, fit, problem = fitted_problem
    p1 = data.x.shape[1]
    beta_tilde = fit.delta_hat.beta
    s_beta = score(fit.delta_hat, data)[:p1]
    neg_h = -hessian(fit.delta_hat, data)[:p1, :p1]

    def neg_quadratic(b):
        r = problem.response - problem.design @ b
        return 0.5 * float(r @ r)

    def neg_taylor(b):
        d = b - beta_tilde
        return -float(s_beta @ d) + 0.5 * float(d @ neg_h @ d)

    for _ in range(20):
        b1 = beta_tilde + rng.normal(size=p1) * 0.4
        b2 = beta_tilde + rng.normal(size=p1) * 0.4
        got = neg_quadratic(b1) - neg_quadratic(b2)
        want = neg_taylor(b1) - neg_taylor(b2)
        assert abs(got - want) / max(1.0, abs(want)) < 1e-8


def test_eigvals_sorted_and_floored(fitted_problem):
    _, _, problem = fitted_problem
    assert np.all(np.diff(problem.eigvals) <= 0)
    floor = 1e-8 * max(np.max(np.abs(problem.eigvals)), 1.0)
    assert np.all(problem.eigvals >= floor)


def test_clipping_reported(rng):
    # a duplicated covariate makes the regression Hessian exactly singular
    x_raw = rng.uniform(-1, 1, size=(80, 1))
    x = np.hstack([np.ones((80, 1)), x_raw, x_raw])
    data = Dataset(y=rng.poisson(3.0, size=80), x=x)
    problem = build_quadratic(data, np.array([1.0, 0.2, 0.2]), np.zeros(1))
    assert problem.clipped_count >= 1
    recon = problem.design.T @ problem.design
    eigvecs_scale = np.linalg.norm(recon)
    assert eigvecs_scale > 0


def test_lambda_grid_log_spacing():
    problem = QuadraticProblem(
        response=np.array([1.0]), design=np.array([[1.0]]),
        eigvals=np.array([1.0]), clipped_count=0,
    )
    grid = lambda_grid(problem, K=3, ratio=0.01)
    np.testing.assert_allclose(grid, [1.0, 0.1, 0.01], rtol=1e-12)


def test_lambda_grid_degenerate():
    problem = QuadraticProblem(
        response=np.zeros(3), design=np.eye(3),
        eigvals=np.ones(3), clipped_count=0,
    )
    with pytest.raises(DegenerateProblem):
        lambda_grid(problem)


def test_lambda_grid_validation(fitted_problem):
    _, _, problem = fitted_problem
    with pytest.raises(InputError):
        lambda_grid(problem, K=1)
    with pytest.raises(InputError):
        lambda_grid(problem, ratio=1.5)


def test_zero_solution_at_lambda_max(fitted_problem):
    _, _, problem = fitted_problem
    grid = lambda_grid(problem, K=10, ratio=1e-3)
    path = lasso_solve(problem, grid)
    assert np.all(path.coefs[0] == 0.0)
    assert np.all(np.sum(path.coefs != 0, axis=1) >= 0)


def test_orthonormal_soft_threshold(rng):
    q_mat, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    response = rng.normal(size=8)
    problem = QuadraticProblem(
        response=response, design=q_mat, eigvals=np.ones(8), clipped_count=0
    )
    corr = q_mat.T @ response
    for lam in (0.1, 0.3, 0.8):
        beta, _ = solve_at_lambda(q_mat, response, lam)
        oracle = np.sign(corr) * np.maximum(np.abs(corr) - lam, 0.0)
        assert np.max(np.abs(beta - oracle)) < 1e-8


def test_lambda_to_zero_matches_least_squares(rng):
    problem = _toy_problem(rng)
    grid = lambda_grid(problem, K=40, ratio=1e-10)
    path = lasso_solve(problem, grid)
    direct = np.linalg.solve(problem.design, problem.response)
    assert np.max(np.abs(path.coefs[-1] - direct)) < 1e-6


def test_kkt_certificate_along_path(rng):
    for _ in range(3):
        problem = _toy_problem(rng)
        grid = lambda_grid(problem, K=30, ratio=1e-4)
        path = lasso_solve(problem, grid)
        for k in range(grid.size):
            assert kkt_gap(problem, path.coefs[k], grid[k]) < 1e-6


def test_objective_descent_per_sweep(rng):
    problem = _toy_problem(rng)
    lam = 0.3 * float(np.max(np.abs(problem.design.T @ problem.response)))
    beta, sweeps, trace = solve_at_lambda(
        problem.design, problem.response, lam, return_trace=True
    )
    assert sweeps == trace.size
    diffs = np.diff(trace)
    assert np.all(diffs <= 1e-12)


def test_path_objective_recorded(fitted_problem):
    _, _, problem = fitted_problem
    grid = lambda_grid(problem, K=12, ratio=1e-3)
    path = lasso_solve(problem, grid)
    for k in range(grid.size):
        resid = problem.response - problem.design @ path.coefs[k]
        obj = 0.5 * float(resid @ resid) + grid[k] * np.sum(np.abs(path.coefs[k]))
        assert path.objective[k] == pytest.approx(obj, rel=1e-10)


def test_no_convergence_reported(rng):
    problem = _toy_problem(rng)
    lam = 1e-9
    with pytest.raises(NoConvergence) as info:
        solve_at_lambda(
            problem.design, problem.response, lam, max_sweeps=1
        )
    assert info.value.lam == lam


def test_lasso_solve_validation(fitted_problem):
    _, _, problem = fitted_problem
    with pytest.raises(InputError):
        lasso_solve(problem, np.array([0.1, 0.5]))
    with pytest.raises(InputError):
        lasso_solve(problem, np.array([-1.0]))
    with pytest.raises(InputError):
        lasso_solve(problem, np.array([]))


def test_unpenalized_intercept(rng):
    problem = _toy_problem(rng)
    lam_max = float(np.max(np.abs(problem.design.T @ problem.response)))
    lam = 10.0 * lam_max
    beta, _ = solve_at_lambda(
        problem.design, problem.response, lam, penalize_intercept=False
    )
    # only the exempt coordinate survives an overwhelming penalty, at its
    # single-column least-squares value
    col = problem.design[:, 0]
    assert np.all(beta[1:] == 0.0)
    assert beta[0] == pytest.approx(
        float(col @ problem.response) / float(col @ col), rel=1e-10
    )
