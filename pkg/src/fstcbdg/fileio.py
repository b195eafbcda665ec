"""On-disk formats: the FEDF binary feature file, JSON sidecars and
partition/run manifests, metrics CSV, and run-config loading.

FEDF layout (all little-endian):
    bytes 0..3   magic "FEDF"
    u32          version (currently 1)
    u32          n rows
    u32          d columns
    u32          flags: bit 0 = labels section present,
                        bit 1 = rows stored pre-normalized
    n*d f32      row-major feature payload
    n   u32      labels (only when flag bit 0 is set)

Features are stored in single precision and widened to float64 on read;
training math stays in double throughout.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, fields

import numpy as np

from fstcbdg.errors import ConfigError, FormatError, NumericError
from fstcbdg.federation import RoundMetrics, TrainConfig

MAGIC = b"FEDF"
VERSION = 1
FLAG_LABELS = 1
FLAG_NORMALIZED = 2
_HEADER = struct.Struct("<4sIIII")

METRICS_COLUMNS = [
    "round",
    "global_test_accuracy",
    "mean_local_total_loss",
    "mean_local_self_train_loss",
    "mean_local_synth_loss",
    "pseudo_label_accuracy",
    "wall_time_ms",
]


def write_features(path, matrix, labels=None, normalized=False):
    """Write a feature matrix (and optional labels) as a FEDF file."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise FormatError(f"feature matrix must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("refusing to write non-finite features")
    n, d = m.shape
    flags = 0
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise FormatError(f"need {n} labels, got shape {labels.shape}")
        if labels.min(initial=0) < 0:
            raise FormatError("labels must be nonnegative")
        flags |= FLAG_LABELS
    if normalized:
        flags |= FLAG_NORMALIZED
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, d, flags))
        fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())
        if labels is not None:
            fh.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())


def read_features(path, want_normalized=False):
    """Read a FEDF file -> (float64 matrix, labels or None, normalized flag).

    When the caller asks for normalized rows and the file was not written
    pre-normalized, rows are L2-normalized after the read.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, d, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = n * d * 4
    expected = _HEADER.size + payload + (n * 4 if flags & FLAG_LABELS else 0)
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    matrix = np.frombuffer(raw, dtype="<f4", count=n * d, offset=_HEADER.size)
    matrix = matrix.reshape(n, d).astype(np.float64)
    labels = None
    if flags & FLAG_LABELS:
        labels = np.frombuffer(raw, dtype="<u4", count=n, offset=_HEADER.size + payload)
        labels = labels.astype(np.int64)
    normalized = bool(flags & FLAG_NORMALIZED)
    if want_normalized and not normalized:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise NumericError(f"{path}: zero-norm row cannot be normalized")
        matrix /= norms
        normalized = True
    return np.ascontiguousarray(matrix), labels, normalized


def write_class_names(path, names):
    """JSON sidecar mapping class index -> display name."""
    with open(path, "w") as fh:
        json.dump({str(i): str(name) for i, name in enumerate(names)}, fh, indent=1)


def read_class_names(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return [doc[str(i)] for i in range(len(doc))]
    except KeyError as exc:
        raise FormatError(f"{path}: class-name indices must be 0..K-1") from exc


def export_metrics(metrics, path):
    """Fixed-column CSV, one row per round (header always present)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for m in metrics:
            writer.writerow([
                m.round,
                repr(m.global_test_accuracy),
                repr(m.mean_local_total_loss),
                repr(m.mean_local_self_train_loss),
                repr(m.mean_local_synth_loss),
                repr(m.pseudo_label_accuracy),
                repr(m.wall_time_ms),
            ])


def read_metrics(path):
    """Re-parse an exported metrics CSV into RoundMetrics (no client list)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_COLUMNS:
            raise FormatError(f"{path}: unexpected metrics header {header}")
        for row in reader:
            if len(row) != len(METRICS_COLUMNS):
                raise FormatError(f"{path}: malformed metrics row {row}")
            out.append(RoundMetrics(
                round=int(row[0]),
                global_test_accuracy=float(row[1]),
                mean_local_total_loss=float(row[2]),
                mean_local_self_train_loss=float(row[3]),
                mean_local_synth_loss=float(row[4]),
                pseudo_label_accuracy=float(row[5]),
                participating_clients=[],
                wall_time_ms=float(row[6]),
            ))
    return out


def write_entropy_csv(path, report):
    """Per-sample entropy table for confidence plots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "entropy"])
        for i, h in enumerate(report.per_sample):
            writer.writerow([i, repr(float(h))])


@dataclass
class RunSpec:
    """Parsed run configuration: hyperparameters plus file locations."""

    train: TrainConfig
    train_features: str
    test_features: str
    prototypes: str
    class_names: str | None
    partition: dict
    output_dir: str
    algorithm: str = "fst-cbdg"


_TRAIN_KEY_ALIASES = {"lambda": "lam"}
_PARTITION_KEYS = {"strategy", "n_clients", "s", "alpha", "seed", "manifest"}
_DATA_KEYS = {"train_features", "test_features", "prototypes", "class_names"}
_TOP_KEYS = {"train", "data", "partition", "output", "algorithm"}
_ALGORITHMS = {"fst-cbdg", "supervised-fedavg", "centralized-probe"}


def _reject_unknown(doc, allowed, where):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def load_run_config(path):
    """Load and validate a JSON run configuration.

    Unknown keys anywhere in the document are rejected; missing train keys
    fall back to the TrainConfig defaults.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _reject_unknown(doc, _TOP_KEYS, "top-level")

    train_doc = dict(doc.get("train", {}))
    for alias, target in _TRAIN_KEY_ALIASES.items():
        if alias in train_doc:
            train_doc[target] = train_doc.pop(alias)
    valid_fields = {f.name for f in fields(TrainConfig)}
    _reject_unknown(train_doc, valid_fields, "train")
    try:
        train = TrainConfig(**train_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from exc

    data_doc = doc.get("data", {})
    _reject_unknown(data_doc, _DATA_KEYS, "data")
    for key in ("train_features", "test_features", "prototypes"):
        if key not in data_doc:
            raise ConfigError(f"data.{key} is required")

    part_doc = dict(doc.get("partition", {}))
    _reject_unknown(part_doc, _PARTITION_KEYS, "partition")
    if "manifest" not in part_doc:
        if "strategy" not in part_doc or "n_clients" not in part_doc:
            raise ConfigError("partition needs either a manifest or strategy + n_clients")
        if part_doc["strategy"] not in ("iid", "sharding", "lda"):
            raise ConfigError(f"unknown partition strategy {part_doc['strategy']!r}")

    out_doc = doc.get("output", {})
    _reject_unknown(out_doc, {"dir"}, "output")

    algorithm = doc.get("algorithm", "fst-cbdg")
    if algorithm not in _ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; pick from {sorted(_ALGORITHMS)}")

    return RunSpec(
        train=train,
        train_features=data_doc["train_features"],
        test_features=data_doc["test_features"],
        prototypes=data_doc["prototypes"],
        class_names=data_doc.get("class_names"),
        partition=part_doc,
        output_dir=out_doc.get("dir", "out"),
        algorithm=algorithm,
    )
