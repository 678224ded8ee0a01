"""CSV and JSON file formats.

Dataset CSV: header ``y,x1,...,xp`` (just ``y`` when there are no
covariates), one row per time step in time order, counts as nonnegative
integers, covariates as decimals. The intercept column is never stored;
readers prepend it. Parameter JSON: ``{"beta": [...], "gamma": [...]}``.

All files are UTF-8, comma-separated with ``.`` as the decimal point.
JSON numbers go through Python's repr, which round-trips float64 exactly.
"""

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import InputError
from .model import Dataset, GlarmaParams

PathLike = Union[str, Path]


def read_dataset_csv(path: PathLike) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if not header or header[0] != "y":
            raise InputError(f"{path}: first column must be named 'y'")
        expected = ["y"] + [f"x{i}" for i in range(1, len(header))]
        if header != expected:
            raise InputError(
                f"{path}: header must be {','.join(expected)}, got {','.join(header)}"
            )
        p = len(header) - 1
        ys = []
        cov = []
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != p + 1:
                raise InputError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {p + 1}"
                )
            raw = row[0].strip()
            try:
                val = int(raw)
            except ValueError:
                raise InputError(
                    f"{path}: row {row_no}, column y: {raw!r} is not an integer count"
                )
            if val < 0:
                raise InputError(
                    f"{path}: row {row_no}, column y: negative count {val}"
                )
            ys.append(val)
            try:
                cov.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise InputError(f"{path}: row {row_no}: {exc}")
    if not ys:
        raise InputError(f"{path}: no data rows")
    covariates = np.asarray(cov, dtype=np.float64) if p else None
    return Dataset.from_covariates(np.asarray(ys), covariates)


def write_dataset_csv(path: PathLike, data: Dataset) -> None:
    path = Path(path)
    p = data.p
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{i}" for i in range(1, p + 1)])
        for t in range(data.n):
            writer.writerow([int(data.y[t])] + [repr(v) for v in data.x[t, 1:]])


def read_covariates_csv(path: PathLike) -> np.ndarray:
    """Raw covariate matrix (no counts, no intercept), header ``x1,...,xp``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file")
        expected = [f"x{i}" for i in range(1, len(header) + 1)]
        if header != expected:
            raise InputError(
                f"{path}: header must be {','.join(expected)}, got {','.join(header)}"
            )
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}: row {row_no} has {len(row)} fields, "
                    f"expected {len(header)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InputError(f"{path}: row {row_no}: {exc}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def read_params_json(path: PathLike) -> GlarmaParams:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}")
    if not isinstance(payload, dict) or "beta" not in payload or "gamma" not in payload:
        raise InputError(f"{path}: expected an object with 'beta' and 'gamma'")
    return GlarmaParams(beta=payload["beta"], gamma=payload["gamma"])


def write_json(path: PathLike, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_path_csv(path: PathLike, lambdas, coefs) -> None:
    """Regularization path: one row per penalty with nnz and all coefficients."""
    lambdas = np.asarray(lambdas)
    coefs = np.asarray(coefs)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["lambda", "nnz"] + [f"beta_{k}" for k in range(coefs.shape[1])]
        )
        for k in range(lambdas.size):
            row = [repr(float(lambdas[k])), int(np.sum(coefs[k] != 0))]
            row += [repr(float(v)) for v in coefs[k]]
            writer.writerow(row)
