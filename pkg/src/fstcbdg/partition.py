"""Client data partitioners: IID, label-sorted sharding, and Dirichlet (LDA).

All three return a PartitionMap whose index lists are disjoint and cover
the dataset exactly. Per-client lists are stored sorted (membership is
what matters; ordering is owned by the trainer's shuffle streams).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from fstcbdg.errors import FormatError


@dataclass
class PartitionMap:
    """Disjoint assignment of dataset indices to clients."""

    assignments: list  # list of sorted int64 arrays
    strategy_tag: str
    seed: int

    @property
    def n_clients(self):
        return len(self.assignments)

    @property
    def empty_clients(self):
        return [i for i, idx in enumerate(self.assignments) if len(idx) == 0]

    def validate_cover(self, n_samples):
        """Raise if the lists are not a disjoint cover of range(n_samples)."""
        merged = np.concatenate([np.asarray(a, dtype=np.int64) for a in self.assignments]) \
            if self.assignments else np.empty(0, dtype=np.int64)
        if merged.shape[0] != n_samples or not np.array_equal(np.sort(merged), np.arange(n_samples)):
            raise ValueError("partition is not a disjoint cover of the dataset")

    def to_json(self):
        return {
            "strategy": self.strategy_tag,
            "seed": int(self.seed),
            "n_clients": self.n_clients,
            "empty_clients": self.empty_clients,
            "clients": [[int(i) for i in idx] for idx in self.assignments],
        }

    @classmethod
    def from_json(cls, doc):
        try:
            assignments = [np.asarray(c, dtype=np.int64) for c in doc["clients"]]
            return cls(assignments, str(doc["strategy"]), int(doc["seed"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed partition manifest: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"partition manifest is not valid JSON: {exc}") from exc
        return cls.from_json(doc)


def _sorted_lists(groups):
    return [np.sort(np.asarray(g, dtype=np.int64)) for g in groups]


def partition_iid(n_samples, n_clients, seed):
    """Random permutation cut into n_clients chunks of size within 1."""
    if n_clients < 1:
        raise ValueError("need at least one client")
    if n_clients > n_samples:
        raise ValueError(f"cannot spread {n_samples} samples over {n_clients} clients")
    rng = np.random.default_rng(seed)
    chunks = np.array_split(rng.permutation(n_samples), n_clients)
    return PartitionMap(_sorted_lists(chunks), "iid", int(seed))


def partition_sharding(labels, n_clients, shards_per_client, seed):
    """Label-sorted order split into n_clients*s shards; each client draws s.

    A shard is a contiguous run of the sorted order, so it spans at most one
    class boundary when classes are at least shard-sized, which caps each
    client at 2*s distinct classes.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    s = int(shards_per_client)
    if s < 1 or n_clients < 1:
        raise ValueError("need at least one shard per client and one client")
    n_shards = n_clients * s
    if n_shards > n:
        raise ValueError(f"{n_shards} shards requested but only {n} samples")
    rng = np.random.default_rng(seed)
    order = np.argsort(labels, kind="stable")
    shards = np.array_split(order, n_shards)
    deal = rng.permutation(n_shards)
    assignments = []
    for c in range(n_clients):
        picks = deal[c * s : (c + 1) * s]
        assignments.append(np.concatenate([shards[i] for i in picks]))
    return PartitionMap(_sorted_lists(assignments), f"sharding(s={s})", int(seed))


def partition_lda(labels, n_clients, alpha, seed):
    """Per-class Dirichlet(alpha) proportions, largest-remainder rounding.

    Every class's samples are split exactly (counts per class sum to the
    class size). Small alpha concentrates classes on few clients and may
    leave some clients empty; that is legitimate and recorded in the map.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    groups = [[] for _ in range(n_clients)]
    for k in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == k))
        props = rng.dirichlet(np.full(n_clients, float(alpha)))
        counts = _largest_remainder(props, idx.shape[0])
        start = 0
        for c, cnt in enumerate(counts):
            groups[c].extend(idx[start : start + cnt])
            start += cnt
    return PartitionMap(_sorted_lists(groups), f"lda(alpha={alpha:g})", int(seed))


def _largest_remainder(proportions, total):
    """Integer counts summing to total, proportional to `proportions`."""
    raw = proportions * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        # Ties broken toward lower indices via stable sort on -fraction.
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base
