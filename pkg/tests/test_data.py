import json
import struct

import numpy as np
import pytest

from feddpc.data import (
    BadMagicError,
    CountMismatchError,
    Dataset,
    PartitionSpec,
    TruncatedFileError,
    dirichlet_partition,
    dirichlet_proportions,
    load_idx,
    save_partition,
    synth_classification,
)
from feddpc.model import ModelSpec, evaluate, init_params, loss_and_grad

from util import mean_max_class_share


class TestSynthClassification:
    def test_balanced_counts(self):
        data = synth_classification(1000, 10, 5, 2.0, seed=0)
        assert len(data) == 1000
        assert data.n_classes == 5
        assert np.bincount(data.labels).tolist() == [200] * 5

    def test_remainder_spread_over_first_classes(self):
        data = synth_classification(11, 3, 3, 1.0, seed=0)
        assert sorted(np.bincount(data.labels).tolist(), reverse=True) == [4, 4, 3]

    def test_deterministic(self):
        a = synth_classification(200, 6, 4, 1.5, seed=42)
        b = synth_classification(200, 6, 4, 1.5, seed=42)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_different_seed_differs(self):
        a = synth_classification(200, 6, 4, 1.5, seed=1)
        b = synth_classification(200, 6, 4, 1.5, seed=2)
        assert not np.array_equal(a.features, b.features)

    def test_wide_separation_is_linearly_separable(self):
        data = synth_classification(10, 2, 2, 10.0, seed=1)
        spec = ModelSpec(kind="logreg", n_features=2, n_classes=2, init_seed=0)
        params = init_params(spec)
        for _ in range(200):
            _, grad = loss_and_grad(spec, params, (data.features, data.labels))
            params = params - 0.5 * grad
        assert evaluate(spec, params, data).accuracy == 1.0

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ValueError):
            synth_classification(1, 2, 2, 1.0, seed=0)
        with pytest.raises(ValueError):
            synth_classification(10, 0, 2, 1.0, seed=0)
        with pytest.raises(ValueError):
            synth_classification(10, 2, 2, 0.0, seed=0)


def write_idx_pair(tmp_path, images, labels):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    images_path = tmp_path / "images.idx"
    labels_path = tmp_path / "labels.idx"
    images_path.write_bytes(struct.pack(">IIII", 0x00000803, n, rows, cols) + images.tobytes())
    labels_path.write_bytes(struct.pack(">II", 0x00000801, len(labels)) + labels.tobytes())
    return str(images_path), str(labels_path)


class TestLoadIdx:
    def test_round_trip(self, tmp_path):
        images = np.arange(16, dtype=np.uint8).reshape(4, 2, 2)
        ipath, lpath = write_idx_pair(tmp_path, images, [0, 1, 2, 1])
        data = load_idx(ipath, lpath)
        assert len(data) == 4
        assert data.n_features == 4
        assert data.n_classes == 3
        np.testing.assert_array_equal(data.labels, [0, 1, 2, 1])
        np.testing.assert_allclose(data.features, images.reshape(4, 4) / 255.0)

    def test_pixels_scaled_to_unit_interval(self, tmp_path):
        images = np.full((2, 1, 3), 255, dtype=np.uint8)
        ipath, lpath = write_idx_pair(tmp_path, images, [0, 1])
        data = load_idx(ipath, lpath)
        assert data.features.max() == 1.0

    def test_empty_file_is_truncation_error(self, tmp_path):
        empty = tmp_path / "empty.idx"
        empty.write_bytes(b"")
        labels = tmp_path / "labels.idx"
        labels.write_bytes(struct.pack(">II", 0x00000801, 0))
        with pytest.raises(TruncatedFileError):
            load_idx(str(empty), str(labels))

    def test_truncated_payload(self, tmp_path):
        ipath = tmp_path / "images.idx"
        ipath.write_bytes(struct.pack(">IIII", 0x00000803, 4, 2, 2) + b"\x00" * 7)
        lpath = tmp_path / "labels.idx"
        lpath.write_bytes(struct.pack(">II", 0x00000801, 4) + b"\x00" * 4)
        with pytest.raises(TruncatedFileError):
            load_idx(str(ipath), str(lpath))

    def test_bad_magic(self, tmp_path):
        ipath = tmp_path / "images.idx"
        ipath.write_bytes(struct.pack(">IIII", 0x00000804, 1, 1, 1) + b"\x00")
        lpath = tmp_path / "labels.idx"
        lpath.write_bytes(struct.pack(">II", 0x00000801, 1) + b"\x00")
        with pytest.raises(BadMagicError):
            load_idx(str(ipath), str(lpath))

    def test_count_mismatch(self, tmp_path):
        ipath = tmp_path / "images.idx"
        ipath.write_bytes(struct.pack(">IIII", 0x00000803, 3, 1, 1) + b"\x00" * 3)
        lpath = tmp_path / "labels.idx"
        lpath.write_bytes(struct.pack(">II", 0x00000801, 4) + b"\x00" * 4)
        with pytest.raises(CountMismatchError):
            load_idx(str(ipath), str(lpath))


class TestDirichletPartition:
    def test_near_uniform_at_huge_alpha(self):
        data = synth_classification(400, 3, 2, 1.0, seed=0)
        one_class = Dataset(data.features, np.zeros(400, dtype=np.int64), 1)
        clients = dirichlet_partition(one_class, PartitionSpec(k=4, alpha=1e6, seed=0))
        for c in clients:
            assert abs(len(c) - 100) <= 5

    def test_single_client_owns_everything(self):
        data = synth_classification(100, 4, 5, 1.0, seed=3)
        clients = dirichlet_partition(data, PartitionSpec(k=1, alpha=0.5, seed=0))
        assert len(clients) == 1
        np.testing.assert_array_equal(np.sort(clients[0].sample_indices), np.arange(100))

    def test_disjoint_and_exhaustive(self):
        data = synth_classification(500, 4, 10, 1.0, seed=5)
        clients = dirichlet_partition(data, PartitionSpec(k=20, alpha=0.3, seed=11))
        all_idx = np.concatenate([c.sample_indices for c in clients])
        assert np.array_equal(np.sort(all_idx), np.arange(500))

    def test_deterministic(self):
        data = synth_classification(500, 4, 10, 1.0, seed=5)
        spec = PartitionSpec(k=10, alpha=0.2, seed=9)
        a = dirichlet_partition(data, spec)
        b = dirichlet_partition(data, spec)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.sample_indices, cb.sample_indices)

    def test_class_counts_match_proportions_within_one(self):
        data = synth_classification(1000, 4, 10, 1.0, seed=6)
        spec = PartitionSpec(k=15, alpha=0.5, seed=21)
        shares = dirichlet_proportions(spec, data.n_classes)
        clients = dirichlet_partition(data, spec)
        class_counts = np.bincount(data.labels, minlength=data.n_classes)
        for j, c in enumerate(clients):
            got = np.bincount(data.labels[c.sample_indices], minlength=data.n_classes)
            for r in range(data.n_classes):
                assert abs(got[r] - shares[r, j] * class_counts[r]) <= 1.0

    def test_lower_alpha_is_more_concentrated(self):
        data = synth_classification(5000, 4, 10, 1.0, seed=7)
        skewed = dirichlet_partition(data, PartitionSpec(k=100, alpha=0.2, seed=13))
        milder = dirichlet_partition(data, PartitionSpec(k=100, alpha=0.6, seed=13))
        assert mean_max_class_share(data, skewed) > mean_max_class_share(data, milder)

    def test_empty_clients_warned(self, caplog):
        # k far above the sample count forces empty clients
        data = synth_classification(10, 2, 2, 1.0, seed=8)
        with caplog.at_level("WARNING", logger="feddpc.data"):
            clients = dirichlet_partition(data, PartitionSpec(k=50, alpha=0.2, seed=2))
        assert any(len(c) == 0 for c in clients)
        assert any("empty" in rec.message for rec in caplog.records)

    def test_save_partition_round_trip(self, tmp_path):
        data = synth_classification(100, 3, 4, 1.0, seed=9)
        clients = dirichlet_partition(data, PartitionSpec(k=5, alpha=1.0, seed=3))
        path = tmp_path / "partition.json"
        save_partition(clients, str(path))
        loaded = json.loads(path.read_text())
        assert set(loaded.keys()) == {str(j) for j in range(5)}
        for c in clients:
            assert loaded[str(c.client_id)] == c.sample_indices.tolist()


class TestSpecValidation:
    def test_partition_spec_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            PartitionSpec(k=5, alpha=0.0, seed=0)

    def test_partition_spec_rejects_bad_k(self):
        with pytest.raises(ValueError):
            PartitionSpec(k=0, alpha=1.0, seed=0)

    def test_dataset_rejects_out_of_range_labels(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.array([0, 1, 5]), n_classes=3)

    def test_dataset_rejects_non_finite_features(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[np.inf, 0.0]]), np.array([0]), n_classes=2)
