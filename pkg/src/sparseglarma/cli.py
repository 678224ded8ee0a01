"""Command line entry point.

Subcommands: simulate, fit, path, select, experiment. Errors map to exit
codes by class: bad input 1, numerical failure 2, non-convergence 3.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    read_covariates_csv,
    read_dataset_csv,
    read_params_json,
    write_dataset_csv,
    write_json,
    write_path_csv,
)
from .errors import ConvergenceError, InputError, NumericalError
from .experiments import ExperimentConfig, run_scenario
from .mle import newton_raphson_fit
from .model import GlarmaParams, simulate
from .pipeline import (
    PipelineConfig,
    fit_result_payload,
    pipeline_payload,
    run_pipeline,
)
from .sparse import build_quadratic, lambda_grid, lasso_solve
from .mle import glm_poisson_init


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the exit-code contract reserves
    # 2 for numerical failures, so remap usage problems to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _bool_flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="glarma",
        description="Sparse variable selection for Poisson GLARMA count series.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    sim = sub.add_parser(
        "simulate", formatter_class=fmt,
        help="draw a count series from given parameters",
    )
    sim.add_argument("--params", required=True, help="parameter JSON (beta, gamma)")
    group = sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--covariates", help="covariate CSV (header x1,...,xp)")
    group.add_argument("--n", type=int, help="series length for an intercept-only model")
    sim.add_argument("--seed", type=int, default=42, help="PRNG seed")
    sim.add_argument("--out", required=True, help="output dataset CSV")

    fit = sub.add_parser(
        "fit", formatter_class=fmt,
        help="maximum-likelihood fit by Newton-Raphson",
    )
    fit.add_argument("--data", required=True, help="dataset CSV (header y,x1,...,xp)")
    fit.add_argument("--q", type=int, required=True, help="feedback order")
    fit.add_argument("--tol", type=float, default=1e-6, help="sup-norm stopping tolerance")
    fit.add_argument("--max-iter", type=int, default=100, help="Newton iteration cap")
    fit.add_argument("--init", help="optional parameter JSON for the start point")
    fit.add_argument("--trace", action="store_true", help="include per-iteration trace")
    fit.add_argument("--dump-derivatives", metavar="PREFIX",
                     help="debug: write score and Hessian at the optimum to "
                          "PREFIX_score.csv / PREFIX_hessian.csv")
    fit.add_argument("--out", required=True, help="output JSON")

    path = sub.add_parser(
        "path", formatter_class=fmt,
        help="l1 regularization path on the quadratic approximation",
    )
    path.add_argument("--data", required=True, help="dataset CSV")
    path.add_argument("--q", type=int, required=True, help="feedback order")
    path.add_argument("--K", type=int, default=100, help="penalty grid size")
    path.add_argument("--ratio", type=float, default=1e-4,
                      help="lambda_min / lambda_max ratio")
    path.add_argument("--penalize-intercept", type=_bool_flag, default=True,
                      metavar="BOOL", help="penalize the intercept coefficient")
    path.add_argument("--tol", type=float, default=1e-6, help="Newton stopping tolerance")
    path.add_argument("--max-iter", type=int, default=100, help="Newton iteration cap")
    path.add_argument("--out", required=True, help="output CSV")

    sel = sub.add_parser(
        "select", formatter_class=fmt,
        help="full pipeline: fit, path, stability selection",
    )
    sel.add_argument("--data", required=True, help="dataset CSV")
    sel.add_argument("--q", type=int, required=True, help="feedback order")
    sel.add_argument("--tol", type=float, default=1e-6, help="Newton stopping tolerance")
    sel.add_argument("--max-iter", type=int, default=100, help="Newton iteration cap")
    sel.add_argument("--K", type=int, default=100, help="penalty grid size")
    sel.add_argument("--ratio", type=float, default=1e-4,
                     help="lambda_min / lambda_max ratio")
    sel.add_argument("--subsamples", type=int, default=1000,
                     help="stability selection subsample count")
    sel.add_argument("--threshold", type=float, default=0.9,
                     help="selection frequency threshold")
    sel.add_argument("--seed", type=int, default=42, help="subsampling seed")
    sel.add_argument("--penalize-intercept", type=_bool_flag, default=True,
                     metavar="BOOL", help="penalize the intercept coefficient")
    sel.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: GLARMA_THREADS or all cores)")
    sel.add_argument("--out", required=True, help="output JSON")

    exp = sub.add_parser(
        "experiment", formatter_class=fmt,
        help="Monte-Carlo scenario runner",
    )
    exp.add_argument("--scenario", required=True,
                     choices=["recovery", "roc", "stability", "timing", "consistency"],
                     help="which study to run")
    exp.add_argument("--config", required=True, help="scenario configuration JSON")
    exp.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: GLARMA_THREADS or all cores)")
    exp.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_simulate(args) -> None:
    params = read_params_json(args.params)
    if args.covariates is not None:
        raw = read_covariates_csv(args.covariates)
        x = np.hstack([np.ones((raw.shape[0], 1)), raw])
    else:
        if args.n < 1:
            raise InputError("--n must be at least 1")
        x = np.ones((args.n, 1))
    data = simulate(params, x, args.seed)
    write_dataset_csv(args.out, data)


def _cmd_fit(args) -> None:
    data = read_dataset_csv(args.data)
    init = read_params_json(args.init) if args.init else None
    result = newton_raphson_fit(
        data, q=args.q, init=init, tol=args.tol, max_iter=args.max_iter,
        keep_trace=args.trace,
    )
    write_json(args.out, fit_result_payload(result, include_trace=args.trace))
    if args.dump_derivatives:
        from .derivatives import score_and_hessian

        s, h = score_and_hessian(result.delta_hat, data)
        np.savetxt(f"{args.dump_derivatives}_score.csv", s[None, :], delimiter=",")
        np.savetxt(f"{args.dump_derivatives}_hessian.csv", h, delimiter=",")


def _cmd_path(args) -> None:
    data = read_dataset_csv(args.data)
    beta_init = glm_poisson_init(data)
    fit = newton_raphson_fit(
        data, q=args.q,
        init=GlarmaParams(beta=beta_init, gamma=np.zeros(args.q)),
        tol=args.tol, max_iter=args.max_iter,
    )
    problem = build_quadratic(data, fit.delta_hat.beta, fit.delta_hat.gamma)
    lambdas = lambda_grid(problem, K=args.K, ratio=args.ratio)
    solved = lasso_solve(problem, lambdas, args.penalize_intercept)
    write_path_csv(args.out, solved.lambdas, solved.coefs)


def _cmd_select(args) -> None:
    data = read_dataset_csv(args.data)
    config = PipelineConfig(
        q=args.q, tol=args.tol, max_iter=args.max_iter, K=args.K,
        ratio=args.ratio, subsamples=args.subsamples, threshold=args.threshold,
        seed=args.seed, penalize_intercept=args.penalize_intercept,
        threads=args.threads,
    )
    result = run_pipeline(data, config)
    write_json(args.out, pipeline_payload(result, config))


def _cmd_experiment(args) -> None:
    cfg_path = Path(args.config)
    try:
        payload = json.loads(cfg_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {cfg_path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{cfg_path}: invalid JSON: {exc}")
    if not isinstance(payload, dict):
        raise InputError(f"{cfg_path}: expected a JSON object")
    payload.pop("scenario", None)
    if "profile_grid" in payload:
        payload["profile_grid"] = tuple(payload["profile_grid"])
    try:
        config = ExperimentConfig(scenario=args.scenario, **payload)
    except TypeError as exc:
        raise InputError(f"{cfg_path}: {exc}")
    run_scenario(config, args.out, threads=args.threads)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "path": _cmd_path,
    "select": _cmd_select,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
