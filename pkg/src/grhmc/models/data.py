"""Regression data container and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, DataError


@dataclass(frozen=True)
class RegressionData:
    """Centered and scaled design and response, with the statistics used to undo the scaling."""

    X: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    x_sd: np.ndarray
    y_mean: float
    y_sd: float
    names: tuple = ()

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @classmethod
    def from_raw(cls, X, y, names=()):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ContractViolation(f"design {X.shape} does not match response length {y.size}")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ContractViolation("need at least two rows and one covariate")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ContractViolation("data contain non-finite values")
        xm, xs = X.mean(axis=0), X.std(axis=0, ddof=1)
        ym, ys = float(y.mean()), float(y.std(ddof=1))
        if np.any(xs <= 0) or ys <= 0:
            raise ContractViolation("a column of the data is constant")
        return cls((X - xm) / xs, (y - ym) / ys, xm, xs, ym, ys, tuple(names))


def read_csv(path, response):
    """Read a numeric CSV with a header row.

    Returns
    -------
    (X, y, names)
        Covariate matrix, the ``response`` column, and the covariate names.

    Raises
    ------
    DataError
        Missing response column, ragged rows, or non-numeric cells (with the
        1-based line number).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file", line=1) from None
        if response not in header:
            raise DataError(f"{path}: response column {response!r} not in header", line=1)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}",
                                line=line)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DataError(f"{path}:{line}: non-numeric value {bad!r}", line=line) from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{line}: non-finite value", line=line)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows", line=2)
    arr = np.array(rows)
    j = header.index(response)
    keep = [i for i in range(len(header)) if i != j]
    return arr[:, keep], arr[:, j], tuple(header[i] for i in keep)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_series(path, column=None):
    """Read a single numeric column (the first one unless ``column`` is named)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file", line=1) from None
        j = 0 if column is None else header.index(column) if column in header else None
        if j is None:
            raise DataError(f"{path}: column {column!r} not in header", line=1)
        out = []
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            try:
                v = float(row[j])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{line}: non-numeric value", line=line) from None
            if not math.isfinite(v):
                raise DataError(f"{path}:{line}: non-finite value", line=line)
            out.append(v)
    if not out:
        raise DataError(f"{path}: no data rows", line=2)
    return np.array(out)
