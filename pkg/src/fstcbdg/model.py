"""Linear softmax classifier over fixed feature vectors.

The model is a single dense layer (weights: K x d, bias: K) trained with
SGD + momentum on a combination of two cross-entropy terms: a soft-target
term on real features and a hard-target term on synthetic features. All
math runs in float64; the heavy array work is delegated to the selected
kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fstcbdg import _kernels as kernels
from fstcbdg.errors import NumericError, ShapeError

LOG_FLOOR = kernels.LOG_FLOOR
UNIT_NORM_TOL = 1e-6


def as_matrix(a, name="array"):
    """Coerce to a C-contiguous float64 2-D array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    return out


def as_vector(a, name="array"):
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {out.shape}")
    return out


def as_classes(a, name="classes"):
    out = np.ascontiguousarray(a, dtype=np.int64)
    if out.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {out.shape}")
    return out


def check_finite(a, name="array"):
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains NaN or infinite entries")


def check_unit_rows(a, name="array", tol=UNIT_NORM_TOL):
    norms = np.linalg.norm(a, axis=1)
    bad = np.abs(norms - 1.0) > tol
    if np.any(bad):
        raise ShapeError(
            f"{name} rows must be unit-norm within {tol}; "
            f"worst deviation {np.abs(norms - 1.0).max():.3g}"
        )


@dataclass
class LinearModel:
    """Dense classification head: ``probs = softmax(weights @ z + bias)``."""

    weights: np.ndarray  # (K, d)
    bias: np.ndarray     # (K,)

    def __post_init__(self):
        self.weights = as_matrix(self.weights, "weights")
        self.bias = as_vector(self.bias, "bias")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}"
            )
        check_finite(self.weights, "weights")
        check_finite(self.bias, "bias")

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]

    def copy(self):
        return LinearModel(self.weights.copy(), self.bias.copy())


@dataclass
class OptimizerState:
    """Per-parameter momentum buffers plus the SGD hyperparameters."""

    momentum_w: np.ndarray
    momentum_b: np.ndarray
    lr: float
    momentum: float
    weight_decay: float

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be nonnegative, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")

    @classmethod
    def for_model(cls, model, lr, momentum=0.0, weight_decay=0.0):
        """Fresh state with zero buffers shaped like the model."""
        return cls(
            momentum_w=np.zeros_like(model.weights),
            momentum_b=np.zeros_like(model.bias),
            lr=float(lr),
            momentum=float(momentum),
            weight_decay=float(weight_decay),
        )


@dataclass
class LossValue:
    """Decomposed objective: ``total = self_train + lam * synth``."""

    total: float
    self_train: float
    synth: float
    lam: float

    def __post_init__(self):
        expected = self.self_train + self.lam * self.synth
        scale = max(1.0, abs(expected))
        if abs(self.total - expected) > 1e-12 * scale:
            raise ValueError(
                f"loss decomposition violated: total={self.total!r}, "
                f"self_train + lam*synth = {expected!r}"
            )

    @classmethod
    def combine(cls, self_train, synth, lam):
        return cls(self_train + lam * synth, self_train, synth, lam)


def init_from_prototypes(prototypes):
    """Model whose weight rows are the class prototype vectors, bias zero.

    The forward pass of the returned model reproduces cosine-logit
    zero-shot probabilities because the rows are unit norm (validated).
    """
    protos = as_matrix(prototypes, "prototypes")
    check_finite(protos, "prototypes")
    check_unit_rows(protos, "prototypes")
    return LinearModel(protos.copy(), np.zeros(protos.shape[0]))


def forward(model, features, validate=True):
    """Per-row class probabilities, shape (n, K). Rows sum to 1."""
    x = as_matrix(features, "features")
    if x.shape[1] != model.dim:
        raise ShapeError(
            f"features have dim {x.shape[1]}, model expects {model.dim}"
        )
    if validate:
        check_finite(x, "features")
    return kernels.linear_probs(x, model.weights, model.bias)


def _check_simplex_rows(q, name, tol=1e-6):
    if q.shape[0] == 0:
        return
    if np.any(q < -tol) or np.any(np.abs(q.sum(axis=1) - 1.0) > tol):
        raise ShapeError(f"{name} rows must lie on the probability simplex (tol {tol})")


def loss_self_train(model, features, soft_labels):
    """Mean over samples of -q . log f(z), with probabilities floored at 1e-12."""
    x = as_matrix(features, "features")
    q = as_matrix(soft_labels, "soft_labels")
    if q.shape[0] != x.shape[0]:
        raise ShapeError(f"{q.shape[0]} soft-label rows for {x.shape[0]} samples")
    if q.shape[1] != model.num_classes:
        raise ShapeError(f"soft_labels have {q.shape[1]} columns, model has {model.num_classes} classes")
    _check_simplex_rows(q, "soft_labels")
    if x.shape[0] == 0:
        return 0.0
    probs = forward(model, x)
    return kernels.soft_cross_entropy(probs, q)


def loss_synth(model, synth_features, synth_classes):
    """Mean over synthetic instances of -log f(z)[class]; 0 for an empty batch."""
    x = as_matrix(synth_features, "synth_features")
    y = as_classes(synth_classes, "synth_classes")
    if y.shape[0] != x.shape[0]:
        raise ShapeError(f"{y.shape[0]} class indices for {x.shape[0]} synthetic rows")
    if x.shape[0] == 0:
        return 0.0
    if y.min() < 0 or y.max() >= model.num_classes:
        raise ShapeError(f"class indices must be in [0, {model.num_classes})")
    probs = forward(model, x)
    return kernels.hard_cross_entropy(probs, y)


def combined_loss(model, features, soft_labels, synth_features, synth_classes, lam):
    """Both loss terms and their lam-weighted total as a LossValue."""
    st = loss_self_train(model, features, soft_labels)
    sy = loss_synth(model, synth_features, synth_classes)
    return LossValue.combine(st, sy, lam)


def gradients(model, features, soft_labels, synth_features=None, synth_classes=None, lam=1.0):
    """Analytic gradient of the combined objective w.r.t. weights and bias.

    Soft targets are treated as constants, so the real-data term is the
    mean of (f(z) - q) outer z; the synthetic term is the same with one-hot
    targets, scaled by lam. Either batch may be empty.
    """
    x = as_matrix(features, "features")
    q = as_matrix(soft_labels, "soft_labels") if soft_labels is not None else np.zeros((0, model.num_classes))
    if x.shape[0] != q.shape[0]:
        raise ShapeError(f"{q.shape[0]} soft-label rows for {x.shape[0]} samples")
    grad_w = np.zeros_like(model.weights)
    grad_b = np.zeros_like(model.bias)
    if x.shape[0] > 0:
        probs = forward(model, x)
        kernels.add_soft_grads(x, probs, q, grad_w, grad_b, 1.0 / x.shape[0])
    if synth_features is not None:
        xs = as_matrix(synth_features, "synth_features")
        ys = as_classes(synth_classes, "synth_classes")
        if xs.shape[0] > 0 and lam != 0.0:
            if ys.min() < 0 or ys.max() >= model.num_classes:
                raise ShapeError(f"class indices must be in [0, {model.num_classes})")
            probs_s = forward(model, xs)
            kernels.add_hard_grads(xs, probs_s, ys, grad_w, grad_b, lam / xs.shape[0])
    return grad_w, grad_b


def sgd_step(model, state, grad_w, grad_b):
    """One in-place SGD+momentum update of both parameter groups.

    Weight decay is added to the gradient, then v <- momentum*v + g and
    param <- param - lr*v. Returns (model, state) for chaining.
    """
    gw = as_matrix(grad_w, "grad_w")
    gb = as_vector(grad_b, "grad_b")
    if gw.shape != model.weights.shape or gb.shape != model.bias.shape:
        raise ShapeError("gradient shapes do not match the model")
    check_finite(gw, "grad_w")
    check_finite(gb, "grad_b")
    kernels.momentum_step(
        model.weights.reshape(-1), state.momentum_w.reshape(-1), gw.reshape(-1),
        state.lr, state.momentum, state.weight_decay,
    )
    kernels.momentum_step(
        model.bias, state.momentum_b, gb,
        state.lr, state.momentum, state.weight_decay,
    )
    return model, state
