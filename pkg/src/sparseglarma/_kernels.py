"""Numba-compiled inner loops.

Everything here is written against plain ndarrays so the functions compile
under ``numba.njit``; when numba is missing the same functions run as pure
Python (correct, just slow). Callers live in :mod:`model`,
:mod:`derivatives` and :mod:`sparse` and are responsible for validation and
error translation.

Time indexing is 0-based: array slot ``t`` is the (t+1)-th observation, and
the residual convention "e is zero before the sample starts" shows up as
loop bounds ``j <= min(q, t)``.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True, nogil=True)
def filter_recursion(y, x, beta, gamma, clamp):
    """Forward recursion for the log mean and working residuals.

    Returns (w, z, e, mu, bad) where bad is the first time index at which
    |w| exceeded ``clamp`` (-1 when the whole series is safe). On overflow,
    w[bad] holds the offending value; outputs past a bad index are
    unspecified.
    """
    n = y.shape[0]
    p1 = x.shape[1]
    q = gamma.shape[0]
    w = np.zeros(n)
    z = np.zeros(n)
    e = np.zeros(n)
    mu = np.zeros(n)
    for t in range(n):
        m = t if t < q else q
        zt = 0.0
        for j in range(1, m + 1):
            zt += gamma[j - 1] * e[t - j]
        wt = zt
        for k in range(p1):
            wt += beta[k] * x[t, k]
        # the comparison is False for NaN as well, so NaN trips the guard
        if not (-clamp <= wt <= clamp):
            w[t] = wt
            return w, z, e, mu, t
        w[t] = wt
        z[t] = zt
        mu[t] = np.exp(wt)
        e[t] = y[t] * np.exp(-wt) - 1.0
    return w, z, e, mu, -1


@njit(cache=True, nogil=True)
def grad_recursion(x, gamma, e):
    """First derivatives of the log mean w.r.t. (beta, gamma), row per t.

    Layout: columns 0..p hold the beta block, columns p+1..p+q the gamma
    block. Row t is the direct term (x_t, e_{t-1..t-q}) minus the
    feedback sum gamma_j * (1 + e_{t-j}) * row_{t-j}.
    """
    n, p1 = x.shape
    q = gamma.shape[0]
    d = p1 + q
    g = np.zeros((n, d))
    for t in range(n):
        for k in range(p1):
            g[t, k] = x[t, k]
        m = t if t < q else q
        for l in range(1, m + 1):
            g[t, p1 + l - 1] = e[t - l]
        for j in range(1, m + 1):
            c = gamma[j - 1] * (1.0 + e[t - j])
            if c != 0.0:
                for a in range(d):
                    g[t, a] -= c * g[t - j, a]
    return g


@njit(cache=True, nogil=True)
def hess_accumulate(y, x, gamma, e, mu, g, slices):
    """Second-derivative recursion, accumulated against (y - mu).

    ``slices`` is caller-allocated storage of shape (n_slots, d, d); slot
    ``t % n_slots`` receives the symmetric second-derivative matrix of the
    log mean at time t. n_slots = q + 1 streams with a ring buffer;
    n_slots = n materializes every slice (slices[t] is then exactly the
    matrix for time t, used by tests).

    Returns sum_t (y_t - mu_t) * slice_t, which is the curvature part of
    the log-likelihood Hessian before the outer-product term. Every slice
    is exactly symmetric by construction (mirrored updates, commutative
    products), so the returned matrix is too.
    """
    n, p1 = x.shape
    q = gamma.shape[0]
    d = p1 + q
    n_slots = slices.shape[0]
    acc = np.zeros((d, d))
    for t in range(n):
        s = slices[t % n_slots]
        for a in range(d):
            for b in range(d):
                s[a, b] = 0.0
        m = t if t < q else q
        # direct term: differentiating the residual inside each feedback lag
        for l in range(1, m + 1):
            c = 1.0 + e[t - l]
            gi = p1 + l - 1
            for a in range(d):
                ua = c * g[t - l, a]
                s[gi, a] -= ua
                s[a, gi] -= ua
        # feedback term: gamma_j (1 + e_{t-j}) (g g' - slice)_{t-j}
        for j in range(1, m + 1):
            c = gamma[j - 1] * (1.0 + e[t - j])
            if c != 0.0:
                sj = slices[(t - j) % n_slots]
                for a in range(d):
                    ga = g[t - j, a]
                    for b in range(d):
                        s[a, b] += c * (ga * g[t - j, b] - sj[a, b])
        r = y[t] - mu[t]
        for a in range(d):
            for b in range(d):
                acc[a, b] += r * s[a, b]
    return acc


@njit(cache=True, nogil=True)
def cd_lasso(design, response, lam, penalized, beta, resid, col_norms, tol,
             max_sweeps, obj_trace):
    """Cyclic coordinate descent for 0.5*||response - design@beta||^2 + lam*|beta|_1.

    ``beta`` and ``resid`` (= response - design@beta) are updated in place,
    so warm starts are just reuse of the buffers. ``penalized`` marks which
    coordinates carry the penalty (0 exempts a coordinate, e.g. an
    unpenalized intercept). ``obj_trace`` records the post-sweep objective
    when its length is at least max_sweeps; pass a length-0 array to skip.

    Returns the number of sweeps used, or -1 when the sweep budget ran out
    before the largest coefficient change in a sweep fell below ``tol``.
    """
    n, p = design.shape
    record = obj_trace.shape[0] >= max_sweeps
    for sweep in range(max_sweeps):
        max_change = 0.0
        for k in range(p):
            nk = col_norms[k]
            if nk <= 0.0:
                continue
            bk = beta[k]
            rho = bk * nk
            for i in range(n):
                rho += design[i, k] * resid[i]
            if penalized[k]:
                if rho > lam:
                    bnew = (rho - lam) / nk
                elif rho < -lam:
                    bnew = (rho + lam) / nk
                else:
                    bnew = 0.0
            else:
                bnew = rho / nk
            diff = bnew - bk
            if diff != 0.0:
                for i in range(n):
                    resid[i] -= design[i, k] * diff
                beta[k] = bnew
            if abs(diff) > max_change:
                max_change = abs(diff)
        if record:
            obj = 0.0
            for i in range(n):
                obj += 0.5 * resid[i] * resid[i]
            for k in range(p):
                if penalized[k]:
                    obj += lam * abs(beta[k])
            obj_trace[sweep] = obj
        if max_change < tol:
            return sweep + 1
    return -1
