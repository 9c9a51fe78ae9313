"""Tests for synthetic data generation and client partitioning."""

import numpy as np
import pytest

from fedsim.data import (
    PartitionError,
    class_means,
    generate_synthetic,
    manifest,
    partition,
)


@pytest.fixture(scope="module")
def dataset():
    return generate_synthetic(
        num_classes=5, samples_per_class=40, input_dim=6, seed=3, noise_sigma=0.5
    )


class TestGenerate:
    def test_shapes_and_split(self, dataset):
        assert dataset.inputs.shape == (200, 6)
        assert dataset.labels.shape == (200,)
        assert dataset.train_indices.shape[0] == 160
        assert dataset.test_indices.shape[0] == 40
        together = np.concatenate([dataset.train_indices, dataset.test_indices])
        assert np.array_equal(np.sort(together), np.arange(200))

    def test_deterministic(self):
        a = generate_synthetic(4, 10, 3, seed=5)
        b = generate_synthetic(4, 10, 3, seed=5)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.train_indices, b.train_indices)

    def test_seed_changes_noise(self):
        a = generate_synthetic(4, 10, 3, seed=5)
        b = generate_synthetic(4, 10, 3, seed=6)
        assert not np.array_equal(a.inputs, b.inputs)

    def test_zero_noise_sits_on_class_means(self):
        data = generate_synthetic(4, 6, 3, seed=1, noise_sigma=0.0)
        means = class_means(4, 3)
        assert np.array_equal(data.inputs, means[data.labels])

    def test_zero_noise_is_nearest_mean_separable(self):
        # With no noise every sample equals its class mean exactly, so the
        # nearest-mean rule must score 100%.
        data = generate_synthetic(6, 8, 4, seed=2, noise_sigma=0.0)
        means = class_means(6, 4)
        dists = np.linalg.norm(data.inputs[:, None, :] - means[None, :, :], axis=2)
        assert np.array_equal(np.argmin(dists, axis=1), data.labels)

    def test_class_means_distinct(self):
        for c, d in [(2, 1), (5, 2), (10, 8), (9, 2)]:
            means = class_means(c, d)
            assert means.shape == (c, d)
            assert np.unique(means, axis=0).shape[0] == c

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 10, 3, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(3, 10, 3, seed=0, noise_sigma=-0.1)


class TestIidPartition:
    def test_disjoint_and_complete(self, dataset):
        parts = partition(dataset, 8, mode="iid", seed=0)
        all_idx = np.concatenate([p.sample_indices for p in parts])
        assert np.array_equal(np.sort(all_idx), dataset.train_indices)
        assert all_idx.shape[0] == np.unique(all_idx).shape[0]

    def test_counts_match_labels(self, dataset):
        parts = partition(dataset, 8, mode="iid", seed=0)
        for p in parts:
            counts = np.bincount(dataset.labels[p.sample_indices], minlength=5)
            assert np.array_equal(counts, p.class_counts)

    def test_roughly_stratified(self, dataset):
        # 160 train samples over 4 clients: each client should hold close to
        # a quarter of every class.
        parts = partition(dataset, 4, mode="iid", seed=0)
        for p in parts:
            for c in range(5):
                share = dataset.train_indices[
                    dataset.labels[dataset.train_indices] == c
                ].shape[0] / 4
                assert abs(p.class_counts[c] - share) <= 1

    def test_proportional_sizes(self, dataset):
        parts = partition(dataset, 4, mode="iid", sizes=[4, 2, 1, 1], seed=0)
        sizes = [p.size for p in parts]
        assert sum(sizes) == 160
        assert sizes[0] == pytest.approx(80, abs=5)
        assert sizes[1] == pytest.approx(40, abs=5)

    def test_deterministic(self, dataset):
        a = partition(dataset, 6, mode="iid", seed=4)
        b = partition(dataset, 6, mode="iid", seed=4)
        for x, y in zip(a, b):
            assert np.array_equal(x.sample_indices, y.sample_indices)

    def test_partition_seed_independent_of_dataset(self, dataset):
        a = partition(dataset, 6, mode="iid", seed=4)
        b = partition(dataset, 6, mode="iid", seed=5)
        assert any(
            not np.array_equal(x.sample_indices, y.sample_indices)
            for x, y in zip(a, b)
        )


class TestLabelSkewPartition:
    def test_exactly_k_classes(self, dataset):
        for k in (1, 2, 3):
            parts = partition(
                dataset, 5, mode="noniid", classes_per_client=k, seed=1
            )
            for p in parts:
                assert np.count_nonzero(p.class_counts) == k

    def test_disjoint(self, dataset):
        parts = partition(dataset, 5, mode="noniid", classes_per_client=2, seed=1)
        all_idx = np.concatenate([p.sample_indices for p in parts])
        assert all_idx.shape[0] == np.unique(all_idx).shape[0]
        assert np.all(np.isin(all_idx, dataset.train_indices))

    def test_counts_match_labels(self, dataset):
        parts = partition(dataset, 5, mode="noniid", classes_per_client=2, seed=1)
        for p in parts:
            counts = np.bincount(dataset.labels[p.sample_indices], minlength=5)
            assert np.array_equal(counts, p.class_counts)

    def test_k_equal_to_num_classes_allowed(self, dataset):
        parts = partition(dataset, 4, mode="noniid", classes_per_client=5, seed=2)
        for p in parts:
            assert np.count_nonzero(p.class_counts) == 5

    def test_deterministic(self, dataset):
        a = partition(dataset, 5, mode="noniid", classes_per_client=2, seed=9)
        b = partition(dataset, 5, mode="noniid", classes_per_client=2, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x.sample_indices, y.sample_indices)

    def test_many_clients_shortage_still_k_classes(self):
        # 20 clients drawing 3 classes from 4 stresses the shared-class
        # shortage path; the k-nonzero guarantee must survive.
        data = generate_synthetic(4, 50, 3, seed=7, noise_sigma=0.3)
        parts = partition(data, 20, mode="noniid", classes_per_client=3, seed=3)
        for p in parts:
            assert np.count_nonzero(p.class_counts) == 3

    def test_requires_k(self, dataset):
        with pytest.raises(PartitionError):
            partition(dataset, 5, mode="noniid")

    def test_rejects_k_above_num_classes(self, dataset):
        with pytest.raises(PartitionError):
            partition(dataset, 5, mode="noniid", classes_per_client=6)


class TestValidation:
    def test_too_many_clients(self, dataset):
        with pytest.raises(PartitionError):
            partition(dataset, 161, mode="iid")

    def test_bad_mode(self, dataset):
        with pytest.raises(PartitionError):
            partition(dataset, 4, mode="dirichlet")

    def test_bad_sizes_length(self, dataset):
        with pytest.raises(PartitionError):
            partition(dataset, 4, mode="iid", sizes=[1, 2, 3])

    def test_nonpositive_weight(self, dataset):
        with pytest.raises(PartitionError):
            partition(dataset, 3, mode="iid", sizes=[1, 0, 2])

    def test_quota_below_k(self, dataset):
        # 160 samples over 80 clients leaves 2 per client, below k=3.
        with pytest.raises(PartitionError):
            partition(dataset, 80, mode="noniid", classes_per_client=3)


class TestManifest:
    def test_json_friendly(self, dataset):
        parts = partition(dataset, 3, mode="iid", seed=0)
        entries = manifest(parts)
        assert [e["client_id"] for e in entries] == [0, 1, 2]
        assert all(isinstance(e["class_counts"], list) for e in entries)
        assert sum(e["size"] for e in entries) == 160
