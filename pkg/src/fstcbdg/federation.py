"""Federated simulation: server preparation, round loop, local self-training
updates, average aggregation, and the supervised/centralized baselines.

Everything is driven by explicit seed streams so that a full run is a pure
function of (data, partition, config): participant sampling is keyed on
(seed, round), each client's batch shuffling and synthetic sampling on
(seed, round, client_id). Clients inside a round are independent given the
downloaded global model, and aggregation iterates participants in sorted
id order, so results do not depend on execution order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from fstcbdg import _kernels as kernels
from fstcbdg.balance import ClassCounts, budgets, equal_budgets, sample
from fstcbdg.errors import ShapeError
from fstcbdg.model import (
    LinearModel,
    LossValue,
    OptimizerState,
    forward,
    init_from_prototypes,
    sgd_step,
)
from fstcbdg.pseudo import SoftLabelTable, hard_labels, init_table, update_table, zero_shot_probs

# Seed-stream domain separators. Changing these invalidates recorded runs.
_PARTICIPANT_SALT = 1
_SHUFFLE_SALT = 2
_SYNTH_SALT = 3
_PROBE_SALT = 4

SAMPLING_STRATEGIES = ("balanced", "equal")
LOSS_MODES = ("both", "self_train", "synth")

# Which defaults come from the FST-CBDG reference setup versus being
# simulator choices. Surfaced in the config docs and the run manifest.
DEFAULT_PROVENANCE = {
    "rounds": "method",
    "local_epochs": "method",
    "participation": "method",
    "batch_size": "artifact",
    "lr": "method",
    "momentum": "method",
    "weight_decay": "method",
    "beta": "method",
    "gamma": "method",
    "lam": "method",
    "sigma": "artifact",
    "seed": "artifact",
    "sampling": "method",
    "loss_mode": "method",
    "weighted_aggregation": "artifact",
}


@dataclass
class TrainConfig:
    """Hyperparameters of one federated run."""

    rounds: int = 10
    local_epochs: int = 1
    participation: float = 0.1
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-5
    beta: float = 0.9           # pseudo-label moving-average retention
    gamma: float = 0.0          # extra synthetic head-room for the majority class
    lam: float = 1.0            # weight of the synthetic-instance loss
    sigma: float = 0.03         # std of the per-class Gaussian sampler
    seed: int = 0
    sampling: str = "balanced"
    loss_mode: str = "both"
    weighted_aggregation: bool = False

    def __post_init__(self):
        if self.rounds < 0 or self.local_epochs < 1 or self.batch_size < 1:
            raise ValueError("rounds must be >= 0, local_epochs and batch_size >= 1")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError(f"participation must be in (0, 1], got {self.participation}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.lr < 0 or self.gamma < 0 or self.lam < 0 or self.sigma <= 0:
            raise ValueError("lr, gamma and lam must be >= 0, sigma > 0")
        if self.sampling not in SAMPLING_STRATEGIES:
            raise ValueError(f"sampling must be one of {SAMPLING_STRATEGIES}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")


@dataclass
class ClientState:
    """Local view of one client: fixed indices, persistent soft labels,
    round-local model/optimizer."""

    client_id: int
    local_indices: np.ndarray
    soft_labels: SoftLabelTable | None
    model: LinearModel | None = None
    optimizer: OptimizerState | None = None

    @property
    def n_local(self):
        return len(self.local_indices)


@dataclass
class ServerState:
    global_model: LinearModel
    round: int
    prototypes: np.ndarray


@dataclass
class RoundMetrics:
    round: int
    global_test_accuracy: float
    mean_local_total_loss: float
    mean_local_self_train_loss: float
    mean_local_synth_loss: float
    pseudo_label_accuracy: float
    participating_clients: list = field(default_factory=list)
    wall_time_ms: float = 0.0


@dataclass
class LocalUpdateResult:
    model: LinearModel
    optimizer: OptimizerState
    soft_labels: SoftLabelTable
    losses: LossValue


def server_prepare(prototypes):
    """Round-0 server: global model initialized from the prototype rows."""
    model = init_from_prototypes(prototypes)
    return ServerState(global_model=model, round=0, prototypes=np.array(prototypes, dtype=np.float64))


def sample_participants(n_clients, participation, seed, round_index, eligible=None):
    """ceil(participation * n_clients) distinct ids, uniform without
    replacement, deterministic per (seed, round). Clients outside
    ``eligible`` (e.g. empty ones) are never drawn; the returned list is
    sorted so downstream iteration order is canonical."""
    if not 0.0 < participation <= 1.0:
        raise ValueError(f"participation must be in (0, 1], got {participation}")
    pool = np.arange(n_clients) if eligible is None else np.asarray(sorted(eligible))
    count = int(math.ceil(round(participation * n_clients, 9)))
    count = min(count, pool.shape[0])
    rng = np.random.default_rng([_PARTICIPANT_SALT, seed, round_index])
    picks = rng.choice(pool, size=count, replace=False)
    return sorted(int(i) for i in picks)


def client_rngs(seed, round_index, client_id):
    """Independent batch-shuffle and synthetic-sampling streams for one
    client in one round."""
    shuffle = np.random.default_rng([_SHUFFLE_SALT, seed, round_index, client_id])
    synth = np.random.default_rng([_SYNTH_SALT, seed, round_index, client_id])
    return shuffle, synth


def local_update(client, global_model, features, prototypes, config, round_index):
    """One client's local pass for one round.

    Per epoch the local indices are shuffled into mini-batches; per batch
    the current model's predictions first refresh that batch's soft labels
    (moving average), then serve both loss terms: soft cross-entropy
    against the refreshed labels and hard cross-entropy on a freshly drawn
    synthetic batch whose per-class sizes come from epoch-start
    pseudo-label counts. The optimizer is fresh (momentum zero) because
    only model parameters travel between server and client.
    """
    n_local = client.n_local
    if n_local == 0:
        raise ValueError(f"client {client.client_id} has no local data")
    model = global_model.copy()
    opt = OptimizerState.for_model(model, config.lr, config.momentum, config.weight_decay)
    table = client.soft_labels
    shuffle_rng, synth_rng = client_rngs(config.seed, round_index, client.client_id)
    x_local = features[client.local_indices]
    k = model.num_classes

    # The moving-average label refresh belongs to the self-training
    # component: ablating it freezes the table, which also freezes the
    # class counts the generator budgets react to.
    use_self = config.loss_mode in ("both", "self_train")
    use_synth = config.loss_mode in ("both", "synth") and config.lam > 0.0
    st_losses, sy_losses = [], []

    for _ in range(config.local_epochs):
        if use_synth:
            counts = ClassCounts.from_labels(hard_labels(table), k, config.gamma)
            budget_fn = budgets if config.sampling == "balanced" else equal_budgets
            epoch_budget = budget_fn(counts)
        order = shuffle_rng.permutation(n_local)
        for start in range(0, n_local, config.batch_size):
            rows = order[start : start + config.batch_size]
            xb = x_local[rows]
            probs = forward(model, xb, validate=False)
            grad_w = np.zeros_like(model.weights)
            grad_b = np.zeros_like(model.bias)
            st = sy = 0.0
            if use_self:
                update_table(table, probs, config.beta, rows=rows)
                targets = table.probs[rows]
                st = kernels.soft_cross_entropy(probs, targets)
                kernels.add_soft_grads(xb, probs, targets, grad_w, grad_b, 1.0 / rows.shape[0])
            if use_synth:
                synth = sample(prototypes, epoch_budget, config.sigma, synth_rng)
                if len(synth) > 0:
                    probs_s = forward(model, synth.features, validate=False)
                    sy = kernels.hard_cross_entropy(probs_s, synth.classes)
                    kernels.add_hard_grads(
                        synth.features, probs_s, synth.classes,
                        grad_w, grad_b, config.lam / len(synth),
                    )
            sgd_step(model, opt, grad_w, grad_b)
            st_losses.append(st)
            sy_losses.append(sy)

    losses = LossValue.combine(
        float(np.mean(st_losses)), float(np.mean(sy_losses)), config.lam
    )
    return LocalUpdateResult(model, opt, table, losses)


def local_update_supervised(client, true_labels, global_model, features, config, round_index):
    """Supervised counterpart of local_update: hard cross-entropy against
    true labels, no pseudo-labels and no synthetic sampling. Uses the same
    batch-shuffle stream, so with pseudo-labels frozen at the true one-hot
    vectors (beta=1, lam=0) the two updates coincide exactly."""
    n_local = client.n_local
    if n_local == 0:
        raise ValueError(f"client {client.client_id} has no local data")
    model = global_model.copy()
    opt = OptimizerState.for_model(model, config.lr, config.momentum, config.weight_decay)
    shuffle_rng, _ = client_rngs(config.seed, round_index, client.client_id)
    x_local = features[client.local_indices]
    y_local = np.ascontiguousarray(true_labels[client.local_indices], dtype=np.int64)
    losses = []
    for _ in range(config.local_epochs):
        order = shuffle_rng.permutation(n_local)
        for start in range(0, n_local, config.batch_size):
            rows = order[start : start + config.batch_size]
            xb = x_local[rows]
            yb = np.ascontiguousarray(y_local[rows])
            probs = forward(model, xb, validate=False)
            grad_w = np.zeros_like(model.weights)
            grad_b = np.zeros_like(model.bias)
            kernels.add_hard_grads(xb, probs, yb, grad_w, grad_b, 1.0 / rows.shape[0])
            sgd_step(model, opt, grad_w, grad_b)
            losses.append(kernels.hard_cross_entropy(probs, yb))
    summary = LossValue.combine(float(np.mean(losses)), 0.0, config.lam)
    return LocalUpdateResult(model, opt, client.soft_labels, summary)


def aggregate(models, weights=None):
    """Elementwise mean of the uploaded parameters (uniform by default)."""
    if not models:
        raise ValueError("cannot aggregate an empty model list")
    shape = (models[0].weights.shape, models[0].bias.shape)
    for m in models[1:]:
        if (m.weights.shape, m.bias.shape) != shape:
            raise ShapeError("all models must share one shape to aggregate")
    w_stack = np.stack([m.weights for m in models])
    b_stack = np.stack([m.bias for m in models])
    if weights is None:
        return LinearModel(w_stack.mean(axis=0), b_stack.mean(axis=0))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[0] != len(models) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("aggregation weights must be nonnegative and sum > 0")
    w = w / w.sum()
    return LinearModel(
        np.tensordot(w, w_stack, axes=1), np.tensordot(w, b_stack, axes=1)
    )


def evaluate_accuracy(model, features, labels):
    """Top-1 accuracy of argmax forward against integer labels."""
    probs = forward(model, features)
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))


def _init_clients(features, partition, prototypes):
    clients = []
    for cid, idx in enumerate(partition.assignments):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.shape[0] == 0:
            clients.append(ClientState(cid, idx, None))
            continue
        table = init_table(zero_shot_probs(features[idx], prototypes))
        clients.append(ClientState(cid, idx, table))
    return clients


def _pseudo_label_accuracy(clients, true_labels):
    if true_labels is None:
        return float("nan")
    correct = 0
    total = 0
    for client in clients:
        if client.soft_labels is None:
            continue
        preds = hard_labels(client.soft_labels)
        correct += int(np.sum(preds == true_labels[client.local_indices]))
        total += client.n_local
    return correct / total if total else float("nan")


def _mean(values):
    return float(np.mean(values)) if values else 0.0


def run_federated(features, partition, prototypes, config,
                  test_features, test_labels, true_labels=None):
    """Full self-training federation: returns one RoundMetrics per round,
    including the round-0 evaluation of the prototype-initialized model."""
    partition.validate_cover(features.shape[0])
    server = server_prepare(prototypes)
    clients = _init_clients(features, partition, prototypes)
    eligible = [c.client_id for c in clients if c.n_local > 0]

    t0 = time.perf_counter()
    metrics = [RoundMetrics(
        round=0,
        global_test_accuracy=evaluate_accuracy(server.global_model, test_features, test_labels),
        mean_local_total_loss=0.0,
        mean_local_self_train_loss=0.0,
        mean_local_synth_loss=0.0,
        pseudo_label_accuracy=_pseudo_label_accuracy(clients, true_labels),
        participating_clients=[],
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
    )]

    for r in range(1, config.rounds + 1):
        t0 = time.perf_counter()
        participants = sample_participants(
            len(clients), config.participation, config.seed, r, eligible=eligible
        )
        uploads, summaries = [], []
        for cid in participants:
            result = local_update(
                clients[cid], server.global_model, features, server.prototypes, config, r
            )
            clients[cid].model = result.model
            clients[cid].optimizer = result.optimizer
            uploads.append(result.model)
            summaries.append(result.losses)
        agg_weights = [clients[cid].n_local for cid in participants] \
            if config.weighted_aggregation else None
        server.global_model = aggregate(uploads, agg_weights)
        server.round = r
        metrics.append(RoundMetrics(
            round=r,
            global_test_accuracy=evaluate_accuracy(server.global_model, test_features, test_labels),
            mean_local_total_loss=_mean([s.total for s in summaries]),
            mean_local_self_train_loss=_mean([s.self_train for s in summaries]),
            mean_local_synth_loss=_mean([s.synth for s in summaries]),
            pseudo_label_accuracy=_pseudo_label_accuracy(clients, true_labels),
            participating_clients=participants,
            wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        ))
    return metrics


def run_supervised_fedavg(features, true_labels, partition, prototypes, config,
                          test_features, test_labels):
    """FedAvg baseline: identical protocol, but each client trains on its
    true labels. pseudo_label_accuracy is reported as 1.0 (targets are
    ground truth by definition)."""
    partition.validate_cover(features.shape[0])
    server = server_prepare(prototypes)
    labels = np.asarray(true_labels, dtype=np.int64)
    clients = [ClientState(cid, np.asarray(idx, dtype=np.int64), None)
               for cid, idx in enumerate(partition.assignments)]
    eligible = [c.client_id for c in clients if c.n_local > 0]

    t0 = time.perf_counter()
    metrics = [RoundMetrics(
        round=0,
        global_test_accuracy=evaluate_accuracy(server.global_model, test_features, test_labels),
        mean_local_total_loss=0.0,
        mean_local_self_train_loss=0.0,
        mean_local_synth_loss=0.0,
        pseudo_label_accuracy=1.0,
        participating_clients=[],
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
    )]

    for r in range(1, config.rounds + 1):
        t0 = time.perf_counter()
        participants = sample_participants(
            len(clients), config.participation, config.seed, r, eligible=eligible
        )
        uploads, summaries = [], []
        for cid in participants:
            result = local_update_supervised(
                clients[cid], labels, server.global_model, features, config, r
            )
            uploads.append(result.model)
            summaries.append(result.losses)
        agg_weights = [clients[cid].n_local for cid in participants] \
            if config.weighted_aggregation else None
        server.global_model = aggregate(uploads, agg_weights)
        server.round = r
        metrics.append(RoundMetrics(
            round=r,
            global_test_accuracy=evaluate_accuracy(server.global_model, test_features, test_labels),
            mean_local_total_loss=_mean([s.total for s in summaries]),
            mean_local_self_train_loss=_mean([s.self_train for s in summaries]),
            mean_local_synth_loss=_mean([s.synth for s in summaries]),
            pseudo_label_accuracy=1.0,
            participating_clients=participants,
            wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        ))
    return metrics


def run_centralized_selftrain(features, prototypes, config,
                              test_features, test_labels, true_labels=None):
    """The federation's single-client degenerate case run directly: all data
    on one client, evaluated every round. Matches run_federated with one
    client and full participation bit for bit (the round boundary still
    resets the optimizer, mirroring the download contract)."""
    n = features.shape[0]
    server = server_prepare(prototypes)
    client = ClientState(0, np.arange(n, dtype=np.int64), None)
    client.soft_labels = init_table(zero_shot_probs(features, prototypes))

    t0 = time.perf_counter()
    metrics = [RoundMetrics(
        round=0,
        global_test_accuracy=evaluate_accuracy(server.global_model, test_features, test_labels),
        mean_local_total_loss=0.0,
        mean_local_self_train_loss=0.0,
        mean_local_synth_loss=0.0,
        pseudo_label_accuracy=_pseudo_label_accuracy([client], true_labels),
        participating_clients=[],
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
    )]
    for r in range(1, config.rounds + 1):
        t0 = time.perf_counter()
        result = local_update(client, server.global_model, features, server.prototypes, config, r)
        server.global_model = aggregate([result.model])
        server.round = r
        metrics.append(RoundMetrics(
            round=r,
            global_test_accuracy=evaluate_accuracy(server.global_model, test_features, test_labels),
            mean_local_total_loss=result.losses.total,
            mean_local_self_train_loss=result.losses.self_train,
            mean_local_synth_loss=result.losses.synth,
            pseudo_label_accuracy=_pseudo_label_accuracy([client], true_labels),
            participating_clients=[0],
            wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        ))
    return metrics


def run_centralized_probe(features, true_labels, prototypes, config,
                          test_features, test_labels, epochs=None):
    """Supervised linear probe on the pooled data; returns final test
    accuracy. One optimizer for the whole run (no round boundaries);
    epochs defaults to rounds * local_epochs for a comparable budget."""
    labels = np.ascontiguousarray(true_labels, dtype=np.int64)
    model = init_from_prototypes(prototypes)
    opt = OptimizerState.for_model(model, config.lr, config.momentum, config.weight_decay)
    if epochs is None:
        epochs = config.rounds * config.local_epochs
    rng = np.random.default_rng([_PROBE_SALT, config.seed])
    n = features.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            xb = features[rows]
            yb = np.ascontiguousarray(labels[rows])
            probs = forward(model, xb, validate=False)
            grad_w = np.zeros_like(model.weights)
            grad_b = np.zeros_like(model.bias)
            kernels.add_hard_grads(xb, probs, yb, grad_w, grad_b, 1.0 / rows.shape[0])
            sgd_step(model, opt, grad_w, grad_b)
    return evaluate_accuracy(model, test_features, test_labels)
