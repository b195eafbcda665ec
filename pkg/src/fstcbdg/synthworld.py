"""Fully synthetic aligned-feature worlds for desk-scale experiments.

Generates unit-norm class prototypes with controllable pairwise separation
and unit-norm "image" features clustered around them, so the whole training
stack can be exercised and evaluated offline with known ground truth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from fstcbdg.model import as_matrix


@dataclass
class SynthWorldConfig:
    num_classes: int
    dim: int
    n_per_class: int
    noise_sigma: float
    proto_separation: float = 1.0
    cone_shift: float = 0.0
    cone_skew: float = 0.3
    center_shift: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 1 or self.dim < 1:
            raise ValueError("num_classes and dim must be at least 1")
        if not 0.0 < self.proto_separation <= 1.0:
            raise ValueError("proto_separation must be in (0, 1]")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        if self.cone_shift < 0 or self.center_shift < 0:
            raise ValueError("cone_shift and center_shift must be nonnegative")
        if not 0.0 <= self.cone_skew <= 1.0:
            raise ValueError("cone_skew must be in [0, 1]")


def make_prototypes(config):
    """K unit-norm prototype rows, near-orthogonal at separation 1.

    Gaussian directions are orthonormalized (up to min(K, d)) and then
    blended with one shared noise direction: separation 1 keeps the
    orthonormal set, smaller values squeeze all prototypes into a narrower
    cone, bounding the pairwise dot products near
    (1-sep)^2 / (sep^2 + (1-sep)^2) the way real text-embedding families
    cluster around a common direction.
    """
    k, d = config.num_classes, config.dim
    if k > d:
        warnings.warn(
            f"{k} prototypes in {d} dimensions cannot all be orthogonal",
            stacklevel=2,
        )
    rng = np.random.default_rng(config.seed)
    base = rng.standard_normal((d, min(k, d)))
    ortho = np.linalg.qr(base)[0].T  # rows orthonormal
    protos = np.empty((k, d))
    protos[: ortho.shape[0]] = ortho
    if k > d:
        extra = rng.standard_normal((k - d, d))
        protos[d:] = extra / np.linalg.norm(extra, axis=1, keepdims=True)
    sep = config.proto_separation
    if sep < 1.0:
        common = rng.standard_normal(d)
        common /= np.linalg.norm(common)
        protos = sep * protos + (1.0 - sep) * common
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    return np.ascontiguousarray(protos)


def class_centers(prototypes, center_shift, cone_shift=0.0, cone_skew=0.3,
                  center_seed=0):
    """Unit-norm per-class cluster centers, displaced from the prototypes.

    With both shifts zero the centers are the prototypes themselves. The
    knobs model how real paired encoders place image clusters relative to
    text vectors:

    * ``cone_shift`` pushes every center along one shared direction. That
      compresses the cosine gaps between classes (near-uniform similarity
      rows, the high-entropy regime). ``cone_skew`` controls how much of
      that direction lies inside the prototype span: the in-span part
      tilts the per-class similarity columns, which is what makes the
      initial predictions systematically imbalanced.
    * ``center_shift`` adds an independent per-class displacement, so the
      cluster layout no longer matches the prototype layout exactly and a
      trained head has room to beat prototype-similarity predictions.

    Offsets depend only on (shifts, center_seed); train and test splits
    built with the same values share one geometry.
    """
    protos = as_matrix(prototypes, "prototypes")
    if center_shift == 0.0 and cone_shift == 0.0:
        return protos.copy()
    rng = np.random.default_rng([7, center_seed])
    centers = protos.copy()
    if cone_shift > 0.0:
        raw = rng.standard_normal(protos.shape[1])
        coeffs, *_ = np.linalg.lstsq(protos.T, raw, rcond=None)
        in_span = protos.T @ coeffs
        off_span = raw - in_span
        in_span /= np.linalg.norm(in_span)
        off_span /= np.linalg.norm(off_span)
        w = cone_skew
        common = np.sqrt(w) * in_span + np.sqrt(1.0 - w) * off_span
        centers += cone_shift * common
    if center_shift > 0.0:
        offsets = rng.standard_normal(protos.shape)
        offsets /= np.linalg.norm(offsets, axis=1, keepdims=True)
        centers += center_shift * offsets
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return centers


def make_dataset(prototypes, n_per_class, noise_sigma, seed,
                 center_shift=0.0, cone_shift=0.0, cone_skew=0.3,
                 center_seed=0):
    """n_per_class unit-norm features around each class center, plus labels.

    Features are normalized after the Gaussian perturbation (matching how
    encoder outputs are stored); labels are for evaluation and partitioning
    only. Rows are grouped by class in ascending order. With the default
    zero shifts the clusters sit exactly on the prototypes.
    """
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")
    protos = as_matrix(prototypes, "prototypes")
    k, d = protos.shape
    centers = class_centers(protos, center_shift, cone_shift, cone_skew, center_seed)
    rng = np.random.default_rng(seed)
    features = np.repeat(centers, n_per_class, axis=0)
    features += noise_sigma * rng.standard_normal(features.shape)
    features /= np.linalg.norm(features, axis=1, keepdims=True)
    labels = np.repeat(np.arange(k, dtype=np.int64), n_per_class)
    return np.ascontiguousarray(features), labels


def make_world(config, test_per_class):
    """Prototypes plus matched train/test splits for one config.

    Returns (prototypes, train_features, train_labels, test_features,
    test_labels); both splits share the same shifted cluster centers.
    """
    protos = make_prototypes(config)
    train = make_dataset(protos, config.n_per_class, config.noise_sigma,
                         config.seed, config.center_shift, config.cone_shift,
                         config.cone_skew, config.seed)
    test = make_dataset(protos, test_per_class, config.noise_sigma,
                        config.seed + 1, config.center_shift, config.cone_shift,
                        config.cone_skew, config.seed)
    return (protos, *train, *test)
