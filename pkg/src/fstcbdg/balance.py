"""Per-class synthetic-instance budgets and Gaussian feature sampling.

The budget rule tops every class up to (1+gamma) times the size of the
locally most frequent class, so classes a client barely sees get the most
synthetic support. Samples are drawn from isotropic Gaussians centred on
the class prototypes and are deliberately not re-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fstcbdg.errors import ShapeError
from fstcbdg.model import as_matrix


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass
class ClassCounts:
    """Pseudo-label histogram of one client, plus the balancing knob gamma."""

    m: np.ndarray
    gamma: float
    k_star: int = field(init=False)

    def __post_init__(self):
        self.m = np.ascontiguousarray(self.m, dtype=np.int64)
        if self.m.ndim != 1:
            raise ShapeError("class counts must be a 1-D vector")
        if np.any(self.m < 0):
            raise ValueError("class counts must be nonnegative")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        self.k_star = int(np.argmax(self.m))

    @classmethod
    def from_labels(cls, labels, num_classes, gamma):
        counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)
        return cls(counts, gamma)

    @property
    def total(self):
        return int(self.m.sum())


def budgets(counts):
    """Balanced per-class budgets: n_k = round((1+gamma)*m_max) - m_k.

    Every class ends at the same real+synthetic total (the rounded target),
    and the majority class itself receives round(gamma*m_max) instances.
    """
    if counts.total == 0:
        raise ValueError("cannot compute budgets for all-zero class counts")
    m_max = counts.m[counts.k_star]
    target = int(_round_half_up((1.0 + counts.gamma) * m_max))
    return (target - counts.m).astype(np.int64)


def equal_budgets(counts):
    """Ablation allocator: same total as budgets(), split evenly.

    The remainder goes to the lowest class indices so the split is
    deterministic.
    """
    total = int(budgets(counts).sum())
    k = counts.m.shape[0]
    out = np.full(k, total // k, dtype=np.int64)
    out[: total % k] += 1
    return out


@dataclass
class SynthBatch:
    """Synthetic feature rows with their (one-hot-by-index) class labels."""

    features: np.ndarray
    classes: np.ndarray
    sigma: float

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.classes = np.ascontiguousarray(self.classes, dtype=np.int64)

    def __len__(self):
        return self.features.shape[0]


def sample(prototypes, class_budgets, sigma, rng):
    """Draw budget[k] vectors from N(prototype_k, sigma^2 I) for each class.

    Rows come out grouped by ascending class index. ``rng`` may be a
    Generator (the caller owns its stream) or an int seed.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    protos = as_matrix(prototypes, "prototypes")
    class_budgets = np.asarray(class_budgets, dtype=np.int64)
    if class_budgets.shape[0] != protos.shape[0]:
        raise ShapeError("one budget per prototype row required")
    if np.any(class_budgets < 0):
        raise ValueError("budgets must be nonnegative")
    rng = np.random.default_rng(rng)
    dim = protos.shape[1]
    total = int(class_budgets.sum())
    features = np.empty((total, dim))
    classes = np.empty(total, dtype=np.int64)
    row = 0
    for k, n_k in enumerate(class_budgets):
        if n_k == 0:
            continue
        features[row : row + n_k] = protos[k] + sigma * rng.standard_normal((n_k, dim))
        classes[row : row + n_k] = k
        row += n_k
    return SynthBatch(features, classes, float(sigma))
