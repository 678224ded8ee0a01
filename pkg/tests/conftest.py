import numpy as np
import pytest

from sparseglarma import Dataset, GlarmaParams, log_likelihood, score, simulate
from sparseglarma.model import GlarmaParams as _GP


def rel_err(approx, exact):
    """Sup-norm error relative to the scale of the exact quantity."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    return float(np.max(np.abs(approx - exact)) / max(1.0, np.max(np.abs(exact))))


def fd_step(value, h=1e-6):
    return h * max(1.0, abs(value))


def fd_gradient(fn, delta, h=1e-6):
    """Central finite differences of a scalar function of a vector."""
    delta = np.asarray(delta, dtype=np.float64)
    out = np.zeros_like(delta)
    for k in range(delta.size):
        hk = fd_step(delta[k], h)
        up = delta.copy()
        up[k] += hk
        dn = delta.copy()
        dn[k] -= hk
        out[k] = (fn(up) - fn(dn)) / (2.0 * hk)
    return out


def fd_jacobian(fn, delta, h=1e-6):
    """Central finite differences of a vector function of a vector."""
    delta = np.asarray(delta, dtype=np.float64)
    cols = []
    for k in range(delta.size):
        hk = fd_step(delta[k], h)
        up = delta.copy()
        up[k] += hk
        dn = delta.copy()
        dn[k] -= hk
        cols.append((fn(up) - fn(dn)) / (2.0 * hk))
    return np.column_stack(cols)


def random_instance(rng, n=None, p=None, q=None):
    """A simulated dataset plus an off-truth evaluation point.

    Parameter ranges are kept moderate so the recursion stays in its safe
    range while the feedback terms remain active.
    """
    n = n or int(rng.integers(20, 101))
    p = p if p is not None else int(rng.integers(0, 6))
    q = q or int(rng.integers(1, 4))
    x = np.ones((n, 1))
    if p:
        x = np.hstack([x, rng.normal(size=(n, p)) * 0.5])
    beta = np.concatenate([[rng.uniform(0.2, 1.5)], rng.uniform(-0.5, 0.5, size=p)])
    gamma = rng.uniform(-0.35, 0.35, size=q)
    truth = GlarmaParams(beta=beta, gamma=gamma)
    data = simulate(truth, x, seed=int(rng.integers(0, 2**31)))
    point = GlarmaParams(
        beta=beta + rng.uniform(-0.1, 0.1, size=p + 1),
        gamma=gamma + rng.uniform(-0.1, 0.1, size=q),
    )
    return data, point


def loglik_of_delta(data, q):
    def fn(delta):
        return log_likelihood(_GP.from_delta(delta, q), data)

    return fn


def score_of_delta(data, q):
    def fn(delta):
        return score(_GP.from_delta(delta, q), data)

    return fn


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250809)
