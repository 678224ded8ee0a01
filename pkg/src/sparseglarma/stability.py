"""Stability selection over subsamples of the transformed problem.

The final penalty is not cross-validated: the path's smallest penalty is
re-fit on many random row-subsamples of the transformed least-squares
problem, each of size floor((p+1)/2), and a coefficient enters the final
support only when its selection frequency across subsamples reaches the
threshold (0.9 by default).

Subsamples are drawn without replacement and independently re-drawn per
iteration. Each subsample owns an RNG stream spawned from the root seed
(numpy SeedSequence spawning), so results are identical whether the
subsamples run serially or on a thread pool, and frequencies are merged
by integer counts in index order.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InputError
from .sparse import CD_MAX_SWEEPS, CD_TOL, QuadraticProblem, _cd_converge


@dataclass
class SelectionReport:
    """Selection frequencies and the thresholded final support."""

    lambda_min: float
    n_subsamples: int
    subsample_size: int
    frequencies: np.ndarray
    threshold: float
    support: List[int]
    seed: int
    n_nonconverged: int = 0


def resolve_threads(threads: Optional[int]) -> int:
    """Worker-count policy: explicit argument, else GLARMA_THREADS, else cores."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("GLARMA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"GLARMA_THREADS is not an integer: {env!r}")
    return max(1, os.cpu_count() or 1)


def _run_block(
    design, response, lam, size, seeds, indices, penalize_intercept
):
    """Solve the subsampled l1 problems for a block of subsample indices."""
    nrows, p = design.shape
    counts = np.zeros(p, dtype=np.int64)
    failures = 0
    penalized = np.ones(p, dtype=np.bool_)
    if not penalize_intercept:
        penalized[0] = False
    no_trace = np.empty(0)
    beta = np.empty(p)
    for i in indices:
        rng = np.random.Generator(np.random.PCG64(seeds[i]))
        rows = rng.choice(nrows, size=size, replace=False)
        sub_x = design[rows]
        sub_y = response[rows]
        beta[:] = 0.0
        resid = sub_y.copy()
        col_norms = np.einsum("ij,ij->j", sub_x, sub_x)
        sweeps = _cd_converge(
            sub_x, sub_y, float(lam), penalized, beta, resid, col_norms,
            CD_TOL, CD_MAX_SWEEPS, no_trace,
        )
        if sweeps < 0:
            # a stuck subsample selects nothing; tallied for diagnostics
            failures += 1
            continue
        counts += beta != 0
    return counts, failures


def stability_select(
    problem: QuadraticProblem,
    lambda_min: float,
    n_subsamples: int = 1000,
    threshold: float = 0.9,
    seed: int = 0,
    penalize_intercept: bool = True,
    threads: Optional[int] = None,
) -> SelectionReport:
    """Frequency-threshold selection at a fixed penalty over row subsamples."""
    if not (0.0 < threshold <= 1.0):
        raise InputError("threshold must lie in (0, 1]")
    if n_subsamples < 1:
        raise InputError("n_subsamples must be at least 1")
    if lambda_min <= 0:
        raise InputError("lambda_min must be positive")
    nrows, p = problem.design.shape
    size = max(1, nrows // 2)
    root = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
    seeds = root.spawn(n_subsamples)

    n_workers = resolve_threads(threads)
    design = np.ascontiguousarray(problem.design)
    response = np.ascontiguousarray(problem.response, dtype=np.float64)
    if n_workers == 1 or n_subsamples == 1:
        counts, failures = _run_block(
            design, response, lambda_min, size, seeds,
            range(n_subsamples), penalize_intercept,
        )
    else:
        blocks = np.array_split(np.arange(n_subsamples), n_workers)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(
                    _run_block, design, response, lambda_min, size, seeds,
                    block, penalize_intercept,
                )
                for block in blocks
                if block.size
            ]
            results = [f.result() for f in futures]
        counts = sum(r[0] for r in results)
        failures = sum(r[1] for r in results)

    frequencies = counts / float(n_subsamples)
    support = [int(k) for k in np.flatnonzero(frequencies >= threshold)]
    return SelectionReport(
        lambda_min=float(lambda_min),
        n_subsamples=int(n_subsamples),
        subsample_size=int(size),
        frequencies=frequencies,
        threshold=float(threshold),
        support=support,
        seed=int(seed),
        n_nonconverged=int(failures),
    )
