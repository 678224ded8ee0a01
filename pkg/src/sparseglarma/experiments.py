"""Monte-Carlo harness: parameter recovery, ROC curves, stability, timing.

Each scenario runs independent replications of a simulate/fit/select
pipeline and writes three files into the output directory:

``replications.csv``
    Long format, one value per row: ``rep,seed,group,metric,index,value``.
    ``group`` carries the sweep coordinate (``n=...``, ``q=...`` or the
    comparison arm), ``metric`` names the quantity and ``index`` is used
    for vector-valued metrics (ROC points, selection frequencies).
``summary.csv``
    Aggregates in the same spirit: ``group,metric,value``.
``manifest.json``
    Full configuration echo, package version, root seed, and the list of
    excluded (failed) replications.

Replication r of a scenario derives every random stream from
(config.seed, r), so reruns reproduce the CSV files byte for byte; rows
whose metric starts with ``seconds`` (wall-clock) are exempt from that
guarantee. Replications that fail numerically are logged with their seed
and excluded from the summaries; the scenario aborts if more than 10% of
replications fail.
"""

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .dataio import write_json
from .errors import EmptyTruth, GlarmaError, InputError, NumericalError
from .mle import (
    glm_poisson_init,
    newton_beta_fit,
    newton_raphson_fit,
    profile_gamma1_fit,
)
from .model import Dataset, GlarmaParams, simulate
from .pipeline import PipelineConfig, run_pipeline
from .sparse import LassoPath, build_quadratic, lambda_grid, lasso_solve

_MASK64 = 0xFFFFFFFFFFFFFFFF

SCENARIOS = ("recovery", "roc", "stability", "timing", "consistency")


@dataclass
class ExperimentConfig:
    """Design of one Monte-Carlo scenario.

    ``n_grid``/``q_grid`` optionally sweep the sample size or feedback
    order within a single scenario run (recovery, consistency and timing
    use them); when absent the scalar ``n``/``q`` is used alone.
    """

    scenario: str
    n: int
    p: int
    q: int
    beta_star: np.ndarray
    gamma_star: np.ndarray
    replications: int
    seed: int
    covariate_spec: str = "standard_normal"
    n_grid: Optional[List[int]] = None
    q_grid: Optional[List[int]] = None
    K: int = 100
    ratio: float = 1e-4
    subsamples: int = 1000
    threshold: float = 0.9
    profile_grid: Tuple[float, float, float] = (0.05, 0.95, 0.01)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InputError(
                f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}"
            )
        self.beta_star = np.atleast_1d(np.asarray(self.beta_star, dtype=np.float64))
        self.gamma_star = np.atleast_1d(np.asarray(self.gamma_star, dtype=np.float64))
        if self.beta_star.size != self.p + 1:
            raise InputError(
                f"beta_star has length {self.beta_star.size}, expected p+1={self.p + 1}"
            )
        if self.gamma_star.size != self.q:
            raise InputError(
                f"gamma_star has length {self.gamma_star.size}, expected q={self.q}"
            )
        if self.replications < 1:
            raise InputError("replications must be at least 1")


@dataclass
class RocCurve:
    """Operating points of a path against the true support, plus the area."""

    points: List[Tuple[float, float]]
    auc: float


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from a tuple of integers (SeedSequence)."""
    ss = np.random.SeedSequence([int(p) & _MASK64 for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def make_covariates(
    n: int, p: int, rng: np.random.Generator, spec: str = "standard_normal"
) -> np.ndarray:
    """Covariate matrix with intercept column for the simulation designs."""
    if p == 0:
        return np.ones((n, 1))
    if spec == "standard_normal":
        raw = rng.standard_normal((n, p))
    elif spec == "uniform":
        raw = rng.uniform(-1.0, 1.0, size=(n, p))
    else:
        raise InputError(f"unknown covariate_spec {spec!r}")
    return np.hstack([np.ones((n, 1)), raw])


def roc_from_path(path: LassoPath, true_support: Sequence[int]) -> RocCurve:
    """True/false positive rates of every path solution, intercept excluded.

    Support recovery concerns the p covariates only: coefficient 0 (the
    intercept) never counts as either a true or a false positive. Points
    are sorted by (fpr, tpr), deduplicated, and completed with the (0,0)
    and (1,1) endpoints; the area is the trapezoidal integral.
    """
    true_set = {int(k) for k in true_support}
    if not true_set:
        raise EmptyTruth("true_support is empty")
    p = path.coefs.shape[1] - 1
    if any(k < 1 or k > p for k in true_set):
        raise InputError("true_support must be a subset of {1,...,p}")
    n_neg = p - len(true_set)
    if n_neg == 0:
        raise InputError("no negative positions to score against")
    pts = {(0.0, 0.0), (1.0, 1.0)}
    for row in path.coefs:
        selected = {int(k) for k in np.flatnonzero(row) if k >= 1}
        tp = len(selected & true_set)
        fp = len(selected - true_set)
        pts.add((fp / n_neg, tp / len(true_set)))
    points = sorted(pts)
    xs = np.array([p_[0] for p_ in points])
    ys = np.array([p_[1] for p_ in points])
    auc = float(np.trapezoid(ys, xs))
    return RocCurve(points=points, auc=auc)


class _Recorder:
    """Accumulates long-format rows for the two CSV outputs."""

    def __init__(self):
        self.rep_rows: List[list] = []
        self.sum_rows: List[list] = []

    def rep(self, rep, seed, group, metric, index, value):
        self.rep_rows.append([rep, seed, group, metric, index, repr(float(value))])

    def summary(self, group, metric, value):
        self.sum_rows.append([group, metric, repr(float(value))])


class _FailureTracker:
    def __init__(self, total: int):
        self.total = total
        self.failures: List[dict] = []

    def record(self, group: str, rep: int, seed: int, exc: Exception):
        self.failures.append(
            {"group": group, "rep": rep, "seed": seed, "error": str(exc)}
        )
        if len(self.failures) > 0.1 * self.total:
            raise NumericalError(
                f"{len(self.failures)} of {self.total} replications failed; "
                "aborting scenario"
            )


def _true_params(config: ExperimentConfig) -> GlarmaParams:
    return GlarmaParams(beta=config.beta_star, gamma=config.gamma_star)


def _simulate_rep(config: ExperimentConfig, n: int, rep: int) -> Dataset:
    cov_rng = np.random.Generator(
        np.random.PCG64(derive_seed(config.seed, rep, 1))
    )
    x = make_covariates(n, config.p, cov_rng, config.covariate_spec)
    return simulate(_true_params(config), x, derive_seed(config.seed, rep, 2))


def _quantiles(values: np.ndarray):
    return (
        float(np.median(values)),
        float(np.quantile(values, 0.25)),
        float(np.quantile(values, 0.75)),
    )


def _run_recovery(config: ExperimentConfig, rec: _Recorder, threads=None):
    ladder = config.n_grid or [config.n]
    tracker = _FailureTracker(len(ladder) * config.replications)
    for n in ladder:
        group = f"n={n}"
        estimates: Dict[str, List[float]] = {}
        for rep in range(config.replications):
            seed = derive_seed(config.seed, rep, 2)
            t0 = time.perf_counter()
            try:
                data = _simulate_rep(config, n, rep)
                fit = newton_raphson_fit(data, q=config.q)
            except GlarmaError as exc:
                tracker.record(group, rep, seed, exc)
                continue
            names = [f"beta_{k}" for k in range(config.p + 1)]
            names += [f"gamma_{j}" for j in range(1, config.q + 1)]
            for name, value in zip(names, fit.delta_hat.delta):
                rec.rep(rep, seed, group, name, "", value)
                estimates.setdefault(name, []).append(float(value))
            rec.rep(rep, seed, group, "converged", "", float(fit.converged))
            rec.rep(rep, seed, group, "iterations", "", float(fit.iterations))
            rec.rep(rep, seed, group, "seconds", "", time.perf_counter() - t0)
        for name, values in estimates.items():
            med, q1, q3 = _quantiles(np.asarray(values))
            rec.summary(group, f"median:{name}", med)
            rec.summary(group, f"q1:{name}", q1)
            rec.summary(group, f"q3:{name}", q3)
            rec.summary(group, f"iqr:{name}", q3 - q1)
    return tracker


_ROC_ARMS = ("gamma_estimated", "gamma_known", "gamma_zero")


def _run_roc(config: ExperimentConfig, rec: _Recorder, threads=None):
    true_support = [int(k) for k in np.flatnonzero(config.beta_star[1:]) + 1]
    tracker = _FailureTracker(config.replications)
    aucs: Dict[str, List[float]] = {arm: [] for arm in _ROC_ARMS}
    for rep in range(config.replications):
        seed = derive_seed(config.seed, rep, 2)
        t0 = time.perf_counter()
        try:
            data = _simulate_rep(config, config.n, rep)
            beta_init = glm_poisson_init(data)
            fit = newton_raphson_fit(
                data, q=config.q,
                init=GlarmaParams(beta=beta_init, gamma=np.zeros(config.q)),
            )
            known_fit = newton_beta_fit(
                data, config.gamma_star, init_beta=beta_init
            )
            # every arm expands the quadratic at the beta estimate that is
            # maximal for its own feedback vector; for the zero arm that
            # is the GLM fit itself
            expansions = {
                "gamma_estimated": (fit.delta_hat.beta, fit.delta_hat.gamma),
                "gamma_known": (known_fit.delta_hat.beta, config.gamma_star),
                "gamma_zero": (beta_init, np.zeros(config.q)),
            }
            curves = {}
            for arm, (beta_arm, gamma_arm) in expansions.items():
                problem = build_quadratic(data, beta_arm, gamma_arm)
                lambdas = lambda_grid(problem, K=config.K, ratio=config.ratio)
                path = lasso_solve(problem, lambdas)
                curves[arm] = roc_from_path(path, true_support)
        except GlarmaError as exc:
            tracker.record("roc", rep, seed, exc)
            continue
        for j, value in enumerate(fit.delta_hat.gamma, start=1):
            rec.rep(rep, seed, "gamma_estimated", f"gamma_{j}", "", value)
        for arm in _ROC_ARMS:
            curve = curves[arm]
            aucs[arm].append(curve.auc)
            rec.rep(rep, seed, arm, "auc", "", curve.auc)
            for i, (fpr, tpr) in enumerate(curve.points):
                rec.rep(rep, seed, arm, "fpr", i, fpr)
                rec.rep(rep, seed, arm, "tpr", i, tpr)
        rec.rep(rep, seed, "roc", "seconds", "", time.perf_counter() - t0)
    for arm in _ROC_ARMS:
        values = np.asarray(aucs[arm])
        if values.size:
            rec.summary(arm, "mean:auc", float(values.mean()))
            rec.summary(arm, "sd:auc", float(values.std(ddof=1)) if values.size > 1 else 0.0)
            rec.summary(arm, "n_effective", float(values.size))
    return tracker


def _run_stability(config: ExperimentConfig, rec: _Recorder, threads=None):
    true_set = {int(k) for k in np.flatnonzero(config.beta_star[1:]) + 1}
    tracker = _FailureTracker(config.replications)
    tps, fps = [], []
    freq_sum = np.zeros(config.p + 1)
    n_ok = 0
    for rep in range(config.replications):
        seed = derive_seed(config.seed, rep, 2)
        t0 = time.perf_counter()
        try:
            data = _simulate_rep(config, config.n, rep)
            pipe = run_pipeline(
                data,
                PipelineConfig(
                    q=config.q, K=config.K, ratio=config.ratio,
                    subsamples=config.subsamples, threshold=config.threshold,
                    seed=derive_seed(config.seed, rep, 3), threads=threads,
                ),
            )
        except GlarmaError as exc:
            tracker.record("stability", rep, seed, exc)
            continue
        report = pipe.selection
        support = set(report.support)
        tp = len(support & true_set)
        fp = len(support - true_set - {0})
        tps.append(tp)
        fps.append(fp)
        freq_sum += report.frequencies
        n_ok += 1
        for k, f in enumerate(report.frequencies):
            rec.rep(rep, seed, "stability", "frequency", k, f)
        rec.rep(rep, seed, "stability", "tp_count", "", tp)
        rec.rep(rep, seed, "stability", "fp_count", "", fp)
        rec.rep(rep, seed, "stability", "support_size", "", len(support))
        rec.rep(rep, seed, "stability", "n_nonconverged", "", report.n_nonconverged)
        for j, value in enumerate(pipe.fit.delta_hat.gamma, start=1):
            rec.rep(rep, seed, "stability", f"gamma_{j}", "", value)
        rec.rep(rep, seed, "stability", "seconds", "", time.perf_counter() - t0)
    if n_ok:
        rec.summary("stability", "mean:tp_count", float(np.mean(tps)))
        rec.summary("stability", "mean:fp_count", float(np.mean(fps)))
        rec.summary("stability", "n_effective", float(n_ok))
        for k in range(config.p + 1):
            rec.summary("stability", f"mean:frequency:{k}", freq_sum[k] / n_ok)
    return tracker


def _run_timing(config: ExperimentConfig, rec: _Recorder, threads=None):
    orders = config.q_grid or [config.q]
    tracker = _FailureTracker(len(orders) * config.replications)
    for q in orders:
        group = f"q={q}"
        gamma_star = config.gamma_star[:q]
        if gamma_star.size < q:
            raise InputError(
                f"gamma_star provides {config.gamma_star.size} values; q={q} requested"
            )
        totals = []
        for rep in range(config.replications):
            seed = derive_seed(config.seed, rep, 2)
            try:
                cov_rng = np.random.Generator(
                    np.random.PCG64(derive_seed(config.seed, rep, 1))
                )
                x = make_covariates(config.n, config.p, cov_rng, config.covariate_spec)
                truth = GlarmaParams(beta=config.beta_star, gamma=gamma_star)
                data = simulate(truth, x, seed)
                pipe = run_pipeline(
                    data,
                    PipelineConfig(
                        q=q, K=config.K, ratio=config.ratio,
                        subsamples=config.subsamples, threshold=config.threshold,
                        seed=derive_seed(config.seed, rep, 3), threads=threads,
                    ),
                )
            except GlarmaError as exc:
                tracker.record(group, rep, seed, exc)
                continue
            totals.append(pipe.timings["total"])
            for stage, seconds in pipe.timings.items():
                rec.rep(rep, seed, group, f"seconds:{stage}", "", seconds)
        if totals:
            values = np.asarray(totals)
            rec.summary(group, "mean:seconds:total", float(values.mean()))
            se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
            rec.summary(group, "se:seconds:total", se)
    return tracker


def _run_consistency(config: ExperimentConfig, rec: _Recorder, threads=None):
    if config.p != 0 or config.q != 1:
        raise InputError("consistency scenario requires p=0 and q=1")
    ladder = config.n_grid or [config.n]
    tracker = _FailureTracker(len(ladder) * config.replications)
    for n in ladder:
        group = f"n={n}"
        errors = []
        for rep in range(config.replications):
            seed = derive_seed(config.seed, rep, 2)
            try:
                data = _simulate_rep(config, n, rep)
                g1 = profile_gamma1_fit(
                    data, float(config.beta_star[0]), config.profile_grid
                )
            except GlarmaError as exc:
                tracker.record(group, rep, seed, exc)
                continue
            err = g1 - float(config.gamma_star[0])
            errors.append(err)
            rec.rep(rep, seed, group, "gamma1_hat", "", g1)
            rec.rep(rep, seed, group, "abs_error", "", abs(err))
        if errors:
            rec.summary(group, "rmse:gamma1", float(np.sqrt(np.mean(np.square(errors)))))
            rec.summary(group, "n_effective", float(len(errors)))
    return tracker


_RUNNERS = {
    "recovery": _run_recovery,
    "roc": _run_roc,
    "stability": _run_stability,
    "timing": _run_timing,
    "consistency": _run_consistency,
}


def run_scenario(
    config: ExperimentConfig, out_dir, threads: Optional[int] = None
) -> Dict[str, Path]:
    """Execute a scenario and write replications.csv, summary.csv, manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = _Recorder()
    tracker = _RUNNERS[config.scenario](config, rec, threads=threads)

    rep_path = out / "replications.csv"
    with rep_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "seed", "group", "metric", "index", "value"])
        writer.writerows(rec.rep_rows)
    sum_path = out / "summary.csv"
    with sum_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "metric", "value"])
        writer.writerows(rec.sum_rows)

    cfg = asdict(config)
    cfg["beta_star"] = [float(v) for v in config.beta_star]
    cfg["gamma_star"] = [float(v) for v in config.gamma_star]
    cfg["profile_grid"] = list(config.profile_grid)
    manifest = {
        "scenario": config.scenario,
        "config": cfg,
        "version": __version__,
        "seed": int(config.seed),
        "n_excluded": len(tracker.failures),
        "failures": tracker.failures,
    }
    man_path = out / "manifest.json"
    write_json(man_path, manifest)
    return {"replications": rep_path, "summary": sum_path, "manifest": man_path}
