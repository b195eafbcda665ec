"""Soft pseudo-labels: zero-shot bootstrap, moving-average refinement,
hard-label extraction and entropy diagnostics.

Each client keeps one SoftLabelTable for the lifetime of a run; rows are
convex combinations of the initial zero-shot probabilities and later model
predictions, so they stay on the probability simplex by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fstcbdg import _kernels as kernels
from fstcbdg.errors import ShapeError
from fstcbdg.model import as_matrix, check_finite, check_unit_rows

SIMPLEX_TOL = 1e-6


@dataclass
class SoftLabelTable:
    """Per-sample soft targets (n x K) plus an update counter."""

    probs: np.ndarray
    step: int = 0

    def __post_init__(self):
        self.probs = as_matrix(self.probs, "probs")

    @property
    def n(self):
        return self.probs.shape[0]

    @property
    def num_classes(self):
        return self.probs.shape[1]


@dataclass
class EntropyReport:
    """Shannon entropies (nats) of probability rows, with the log-K bound."""

    per_sample: np.ndarray
    upper_bound: float
    mean: float = field(init=False)
    max: float = field(init=False)

    def __post_init__(self):
        self.per_sample = np.asarray(self.per_sample, dtype=np.float64)
        self.mean = float(self.per_sample.mean()) if self.per_sample.size else 0.0
        self.max = float(self.per_sample.max()) if self.per_sample.size else 0.0


def zero_shot_probs(features, prototypes):
    """softmax of the raw dot products between features and prototypes.

    Both inputs must have unit-norm rows, so the logits are cosine
    similarities in [-1, 1]; with no temperature the resulting rows are
    deliberately close to uniform (high entropy) for generic inputs.
    """
    x = as_matrix(features, "features")
    protos = as_matrix(prototypes, "prototypes")
    if x.shape[1] != protos.shape[1]:
        raise ShapeError(
            f"features dim {x.shape[1]} != prototypes dim {protos.shape[1]}"
        )
    check_finite(x, "features")
    check_unit_rows(x, "features")
    check_unit_rows(protos, "prototypes")
    zeros = np.zeros(protos.shape[0])
    return kernels.linear_probs(x, protos, zeros)


def _check_simplex(rows, name):
    if rows.shape[0] == 0:
        return
    if np.any(rows < -SIMPLEX_TOL) or np.any(np.abs(rows.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise ShapeError(f"{name} rows must lie on the probability simplex")


def init_table(zero_shot):
    """Table seeded with a copy of the zero-shot probabilities, step 0."""
    rows = as_matrix(zero_shot, "zero_shot")
    _check_simplex(rows, "zero_shot")
    return SoftLabelTable(rows.copy(), step=0)


def update_table(table, predictions, beta, rows=None):
    """Moving-average update q <- beta*q + (1-beta)*f, in place.

    ``rows`` selects the table rows the predictions correspond to (mini-batch
    granularity); None updates every row. The step counter increments once
    per call. Returns the same table.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    preds = as_matrix(predictions, "predictions")
    _check_simplex(preds, "predictions")
    if preds.shape[1] != table.num_classes:
        raise ShapeError("prediction columns do not match the table")
    if rows is None:
        if preds.shape[0] != table.n:
            raise ShapeError(f"{preds.shape[0]} prediction rows for table of {table.n}")
        table.probs *= beta
        table.probs += (1.0 - beta) * preds
    else:
        rows = np.asarray(rows)
        if preds.shape[0] != rows.shape[0]:
            raise ShapeError("rows and predictions disagree in length")
        table.probs[rows] = beta * table.probs[rows] + (1.0 - beta) * preds
    table.step += 1
    return table


def hard_labels(table):
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(table.probs, axis=1)


def entropy_report(probs):
    """Per-row Shannon entropy in nats, with 0*log(0) treated as 0."""
    rows = as_matrix(probs, "probs")
    _check_simplex(rows, "probs")
    clipped = np.maximum(rows, kernels.LOG_FLOOR)
    ent = -(np.where(rows > 0.0, rows * np.log(clipped), 0.0)).sum(axis=1)
    return EntropyReport(per_sample=ent, upper_bound=float(np.log(rows.shape[1])))
