"""Datasets and heterogeneous client partitioning.

A Dataset is a dense feature matrix plus integer class labels. Client
partitions are per-class Dirichlet allocations: for each class a
proportion vector over the k clients is sampled and that class's samples
are handed out in contiguous blocks.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

log = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Base class for IDX parsing failures."""


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (n_samples, n_features) float64
    labels: np.ndarray  # (n_samples,) int64
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be a non-empty 2-D matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match {self.features.shape[0]} samples"
            )
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class ClientDataset:
    client_id: int
    sample_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.sample_indices = np.asarray(self.sample_indices, dtype=np.int64)

    def __len__(self) -> int:
        return self.sample_indices.shape[0]


@dataclass(frozen=True)
class PartitionSpec:
    k: int
    alpha: float
    seed: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"client count must be >= 1, got {self.k}")
        if self.alpha <= 0:
            raise ValueError(f"Dirichlet alpha must be > 0, got {self.alpha}")


def synth_classification(
    n_samples: int, n_features: int, n_classes: int, class_sep: float, seed: int
) -> Dataset:
    """Gaussian-blob classification data.

    Each class gets a fixed random mean scaled by `class_sep`; samples are
    unit-variance isotropic Gaussians around it. Class counts are balanced
    up to the division remainder. Sample order is a seeded shuffle.
    """
    if n_classes < 2 or n_samples < n_classes:
        raise ValueError(f"need n_samples >= n_classes >= 2, got {n_samples}, {n_classes}")
    if n_features < 1:
        raise ValueError(f"n_features must be >= 1, got {n_features}")
    if class_sep <= 0:
        raise ValueError(f"class_sep must be > 0, got {class_sep}")

    rng = stream(seed, "synth")
    means = rng.standard_normal((n_classes, n_features)) * class_sep

    base, extra = divmod(n_samples, n_classes)
    counts = np.full(n_classes, base, dtype=np.int64)
    counts[:extra] += 1

    labels = np.repeat(np.arange(n_classes, dtype=np.int64), counts)
    features = means[labels] + rng.standard_normal((n_samples, n_features))
    order = rng.permutation(n_samples)
    return Dataset(features=features[order], labels=labels[order], n_classes=n_classes)


def _read_idx_header(raw: bytes, path: str, expected_magic: int, n_dims: int) -> tuple[list[int], int]:
    header_len = 4 + 4 * n_dims
    if len(raw) < header_len:
        raise TruncatedFileError(f"{path}: file shorter than its {header_len}-byte header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagicError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = list(struct.unpack(f">{n_dims}I", raw[4:header_len]))
    return dims, header_len


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Load an image/label pair of IDX files (big-endian, unsigned bytes).

    Pixels are scaled to [0, 1]; images are flattened to rows*cols features.
    """
    with open(images_path, "rb") as f:
        raw_images = f.read()
    with open(labels_path, "rb") as f:
        raw_labels = f.read()

    (n_images, rows, cols), offset = _read_idx_header(raw_images, images_path, IMAGES_MAGIC, 3)
    payload = raw_images[offset:]
    expected = n_images * rows * cols
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{images_path}: expected {expected} pixel bytes, found {len(payload)}"
        )
    (n_labels,), offset = _read_idx_header(raw_labels, labels_path, LABELS_MAGIC, 1)
    label_payload = raw_labels[offset:]
    if len(label_payload) < n_labels:
        raise TruncatedFileError(
            f"{labels_path}: expected {n_labels} label bytes, found {len(label_payload)}"
        )
    if n_images != n_labels:
        raise CountMismatchError(f"{n_images} images vs {n_labels} labels")

    features = np.frombuffer(payload[:expected], dtype=np.uint8).astype(np.float64) / 255.0
    features = features.reshape(n_images, rows * cols)
    labels = np.frombuffer(label_payload[:n_labels], dtype=np.uint8).astype(np.int64)
    return Dataset(features=features, labels=labels, n_classes=int(labels.max()) + 1)


def dirichlet_proportions(spec: PartitionSpec, n_classes: int) -> np.ndarray:
    """Per-class client share matrix of shape (n_classes, k), rows sum to 1.

    Realised as k independent Gamma(alpha, 1) draws per class, normalised.
    """
    rng = stream(spec.seed, "partition")
    shares = np.empty((n_classes, spec.k), dtype=np.float64)
    for r in range(n_classes):
        draws = rng.gamma(spec.alpha, 1.0, size=spec.k)
        while draws.sum() == 0.0:  # possible underflow at extreme alpha
            draws = rng.gamma(spec.alpha, 1.0, size=spec.k)
        shares[r] = draws / draws.sum()
    return shares


def dirichlet_partition(data: Dataset, spec: PartitionSpec) -> list[ClientDataset]:
    """Split a dataset across k clients with per-class Dirichlet shares.

    For each class, clients receive contiguous blocks of that class's
    samples sized floor(share * n_class); the rounding leftovers go one
    each to the clients with the largest fractional parts. The result is
    checked to be disjoint and exhaustive before returning.
    """
    shares = dirichlet_proportions(spec, data.n_classes)
    assigned: list[list[np.ndarray]] = [[] for _ in range(spec.k)]

    for r in range(data.n_classes):
        class_idx = np.flatnonzero(data.labels == r)
        n_r = class_idx.shape[0]
        if n_r == 0:
            continue
        raw = shares[r] * n_r
        counts = np.floor(raw).astype(np.int64)
        leftover = n_r - int(counts.sum())
        if leftover > 0:
            # stable argsort on negated fractions: ties break to lower client id
            ranked = np.argsort(-(raw - counts), kind="stable")
            counts[ranked[:leftover]] += 1
        stops = np.cumsum(counts)
        starts = stops - counts
        for j in range(spec.k):
            if counts[j] > 0:
                assigned[j].append(class_idx[starts[j] : stops[j]])

    clients = []
    for j in range(spec.k):
        idx = np.concatenate(assigned[j]) if assigned[j] else np.empty(0, dtype=np.int64)
        clients.append(ClientDataset(client_id=j, sample_indices=idx))

    _check_partition(clients, len(data))
    empty = [c.client_id for c in clients if len(c) == 0]
    if empty:
        log.warning("partition left %d client(s) empty: %s", len(empty), empty)
    return clients


def _check_partition(clients: list[ClientDataset], n_total: int) -> None:
    all_idx = np.concatenate([c.sample_indices for c in clients])
    if all_idx.shape[0] != n_total or np.unique(all_idx).shape[0] != n_total:
        raise AssertionError("partition is not a disjoint, exhaustive cover of the dataset")


def save_partition(clients: list[ClientDataset], path: str) -> None:
    """Write a partition as JSON {client_id: [indices]} for audit."""
    payload = {str(c.client_id): c.sample_indices.tolist() for c in clients}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
