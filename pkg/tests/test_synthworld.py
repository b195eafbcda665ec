import numpy as np
import pytest

from fstcbdg.model import init_from_prototypes
from fstcbdg.federation import evaluate_accuracy
from fstcbdg.pseudo import zero_shot_probs
from fstcbdg.synthworld import (
    SynthWorldConfig,
    class_centers,
    make_dataset,
    make_prototypes,
    make_world,
)


def cfg(**kw):
    base = dict(num_classes=10, dim=32, n_per_class=20, noise_sigma=0.1, seed=0)
    base.update(kw)
    return SynthWorldConfig(**base)


class TestPrototypes:
    def test_full_separation_orthogonal(self):
        protos = make_prototypes(cfg(num_classes=2, dim=2))
        assert abs(np.dot(protos[0], protos[1])) < 1e-6

    def test_unit_rows(self):
        protos = make_prototypes(cfg(num_classes=8, dim=16, proto_separation=0.4))
        assert np.allclose(np.linalg.norm(protos, axis=1), 1.0, atol=1e-9)

    def test_deterministic(self):
        a = make_prototypes(cfg(seed=5))
        b = make_prototypes(cfg(seed=5))
        assert np.array_equal(a, b)

    def test_separation_bounds_pairwise_dots(self):
        tight = make_prototypes(cfg(proto_separation=0.3))
        loose = make_prototypes(cfg(proto_separation=1.0))

        def max_offdiag(p):
            g = p @ p.T
            return np.abs(g - np.diag(np.diag(g))).max()

        assert max_offdiag(tight) > max_offdiag(loose)
        assert max_offdiag(loose) < 1e-6

    def test_more_classes_than_dims_warns(self):
        with pytest.warns(UserWarning):
            make_prototypes(cfg(num_classes=5, dim=3))


class TestDataset:
    def test_vanishing_noise_sticks_to_prototypes(self):
        protos = make_prototypes(cfg())
        feats, labels = make_dataset(protos, 5, noise_sigma=1e-9, seed=1)
        for row, lab in zip(feats, labels):
            assert np.linalg.norm(row - protos[lab]) < 1e-6

    def test_rows_unit_norm(self):
        protos = make_prototypes(cfg())
        feats, _ = make_dataset(protos, 10, noise_sigma=0.5, seed=2)
        assert np.allclose(np.linalg.norm(feats, axis=1), 1.0, atol=1e-9)

    def test_label_balance(self):
        protos = make_prototypes(cfg(num_classes=7))
        _, labels = make_dataset(protos, 13, noise_sigma=0.3, seed=3)
        assert np.array_equal(np.bincount(labels), np.full(7, 13))

    def test_zero_shot_self_evaluation(self):
        protos = make_prototypes(cfg())
        feats, labels = make_dataset(protos, 100, noise_sigma=0.1, seed=4)
        probs = zero_shot_probs(feats, protos)
        acc = np.mean(np.argmax(probs, axis=1) == labels)
        assert acc > 0.99

    def test_separability_decreases_with_noise(self):
        accs = []
        for noise in (0.2, 0.45, 0.8):
            vals = []
            for seed in range(3):
                protos = make_prototypes(cfg(seed=seed))
                feats, labels = make_dataset(protos, 60, noise_sigma=noise, seed=seed + 10)
                model = init_from_prototypes(protos)
                vals.append(evaluate_accuracy(model, feats, labels))
            accs.append(np.mean(vals))
        assert accs[0] > accs[1] > accs[2]

    def test_deterministic(self):
        protos = make_prototypes(cfg())
        a = make_dataset(protos, 5, 0.2, seed=6)[0]
        b = make_dataset(protos, 5, 0.2, seed=6)[0]
        assert np.array_equal(a, b)


class TestCenters:
    def test_zero_shift_returns_prototypes(self):
        protos = make_prototypes(cfg())
        assert np.array_equal(class_centers(protos, 0.0, 0.0), protos)

    def test_unit_norm_and_determinism(self):
        protos = make_prototypes(cfg())
        a = class_centers(protos, 0.3, 1.0, cone_skew=0.5, center_seed=4)
        b = class_centers(protos, 0.3, 1.0, cone_skew=0.5, center_seed=4)
        assert np.array_equal(a, b)
        assert np.allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)

    def test_shift_moves_centers_off_prototypes(self):
        protos = make_prototypes(cfg())
        centers = class_centers(protos, 0.5, center_seed=1)
        assert np.linalg.norm(centers - protos) > 0.1

    def test_world_shares_geometry_across_splits(self):
        world_cfg = cfg(cone_shift=0.4, center_shift=0.2, noise_sigma=1e-9)
        protos, train_x, train_y, test_x, test_y = make_world(world_cfg, 5)
        centers = class_centers(protos, 0.2, 0.4, cone_skew=world_cfg.cone_skew,
                                center_seed=world_cfg.seed)
        for row, lab in zip(test_x, test_y):
            assert np.linalg.norm(row - centers[lab]) < 1e-6
        for row, lab in zip(train_x, train_y):
            assert np.linalg.norm(row - centers[lab]) < 1e-6
