"""Tests for the histogram-distance oracle and its isolation guarantees."""

import threading

import numpy as np
import pytest

from fedsim.data import generate_synthetic, partition
from fedsim.similarity import (
    ClassCountSubmission,
    SimilarityMatrix,
    SimilarityOracle,
    histogram_distance,
)


class TestHistogramDistance:
    def test_identical_is_zero(self):
        assert histogram_distance([3, 5, 2], [3, 5, 2]) == 0.0

    def test_disjoint_is_two(self):
        assert histogram_distance([10, 0], [0, 10]) == 2.0
        assert histogram_distance([1, 0, 0], [0, 3, 4]) == 2.0

    def test_hand_value(self):
        # [5,5] -> (0.5, 0.5); [10,0] -> (1, 0); L1 = 0.5 + 0.5 = 1.
        assert histogram_distance([5, 5], [10, 0]) == pytest.approx(1.0)

    def test_scale_invariant_exact(self):
        # Same shape at different totals must give exactly zero.
        assert histogram_distance([1, 3], [2, 6]) == 0.0
        assert histogram_distance([2, 4, 6], [1, 2, 3]) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.integers(0, 20, size=6)
            b = rng.integers(0, 20, size=6)
            if a.sum() == 0 or b.sum() == 0:
                continue
            assert histogram_distance(a, b) == histogram_distance(b, a)

    def test_range_and_triangle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a, b, c = (rng.integers(0, 30, size=5) + 1 for _ in range(3))
            dab = histogram_distance(a, b)
            dbc = histogram_distance(b, c)
            dac = histogram_distance(a, c)
            assert 0.0 <= dab <= 2.0
            assert dac <= dab + dbc + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            histogram_distance([1, 2], [1, 2, 3])


def filled_oracle(counts_by_id, num_classes):
    oracle = SimilarityOracle(sorted(counts_by_id), num_classes)
    for cid, counts in counts_by_id.items():
        oracle.submit(ClassCountSubmission(client_id=cid, counts=tuple(counts)))
    return oracle


class TestOracle:
    def test_matrix_matches_pairwise_distance(self):
        counts = {0: (8, 2, 0), 1: (0, 5, 5), 2: (3, 3, 4)}
        matrix = filled_oracle(counts, 3).compute_matrix()
        for a in counts:
            for b in counts:
                assert matrix.get(a, b) == pytest.approx(
                    histogram_distance(counts[a], counts[b])
                )

    def test_receipt_names_client(self):
        oracle = SimilarityOracle([4], 2)
        receipt = oracle.submit(ClassCountSubmission(client_id=4, counts=(1, 1)))
        assert receipt.client_id == 4

    def test_missing_submission_reported(self):
        oracle = SimilarityOracle([0, 1, 2], 2)
        oracle.submit(ClassCountSubmission(client_id=1, counts=(1, 1)))
        with pytest.raises(ValueError, match=r"\[0, 2\]"):
            oracle.compute_matrix()

    def test_duplicate_submission_rejected(self):
        oracle = SimilarityOracle([0], 2)
        oracle.submit(ClassCountSubmission(client_id=0, counts=(1, 1)))
        with pytest.raises(ValueError, match="already"):
            oracle.submit(ClassCountSubmission(client_id=0, counts=(1, 1)))

    def test_unknown_client_rejected(self):
        oracle = SimilarityOracle([0, 1], 2)
        with pytest.raises(ValueError, match="unknown"):
            oracle.submit(ClassCountSubmission(client_id=7, counts=(1, 1)))

    def test_wrong_length_rejected(self):
        oracle = SimilarityOracle([0], 3)
        with pytest.raises(ValueError):
            oracle.submit(ClassCountSubmission(client_id=0, counts=(1, 1)))

    def test_zero_histogram_rejected(self):
        oracle = SimilarityOracle([0], 2)
        with pytest.raises(ValueError):
            oracle.submit(ClassCountSubmission(client_id=0, counts=(0, 0)))

    def test_negative_counts_rejected(self):
        oracle = SimilarityOracle([0], 2)
        with pytest.raises(ValueError):
            oracle.submit(ClassCountSubmission(client_id=0, counts=(-1, 2)))

    def test_no_count_accessor(self):
        # Raw histograms must not be readable back; only the distance matrix
        # leaves the store.
        oracle = SimilarityOracle([0], 2)
        oracle.submit(ClassCountSubmission(client_id=0, counts=(3, 1)))
        public = [n for n in dir(oracle) if not n.startswith("_")]
        assert public == ["compute_matrix", "submit"]

    def test_concurrent_submissions(self):
        ids = list(range(32))
        oracle = SimilarityOracle(ids, 4)
        errors = []

        def worker(cid):
            try:
                oracle.submit(
                    ClassCountSubmission(client_id=cid, counts=(cid + 1, 2, 3, 4))
                )
            except Exception as exc:  # noqa: BLE001 - collected for the assert
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(c,)) for c in ids]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        matrix = oracle.compute_matrix()
        assert matrix.values.shape == (32, 32)


class TestMatrixValidation:
    def test_rejects_asymmetric(self):
        values = np.array([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            SimilarityMatrix(values=values, client_ids=(0, 1))

    def test_rejects_nonzero_diagonal(self):
        values = np.array([[0.1, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError, match="diagonal"):
            SimilarityMatrix(values=values, client_ids=(0, 1))

    def test_rejects_out_of_range(self):
        values = np.array([[0.0, 2.5], [2.5, 0.0]])
        with pytest.raises(ValueError, match="0, 2"):
            SimilarityMatrix(values=values, client_ids=(0, 1))

    def test_to_dict_roundtrips(self):
        matrix = filled_oracle({0: (1, 1), 3: (2, 0)}, 2).compute_matrix()
        doc = matrix.to_dict()
        assert doc["client_ids"] == [0, 3]
        assert doc["values"][0][1] == matrix.get(0, 3)


class TestPartitionDistances:
    def test_more_shared_classes_means_lower_distance(self):
        # Mean pairwise distance should fall as clients share more classes.
        # Checked across several seeds to keep it a property, not a fluke.
        for seed in range(10):
            data = generate_synthetic(10, 60, 4, seed=seed, noise_sigma=0.5)
            means = []
            for k in (2, 5, 10):
                parts = partition(
                    data, 8, mode="noniid", classes_per_client=k, seed=seed
                )
                oracle = SimilarityOracle(range(8), 10)
                for p in parts:
                    oracle.submit(
                        ClassCountSubmission(
                            client_id=p.client_id,
                            counts=tuple(int(x) for x in p.class_counts),
                        )
                    )
                values = oracle.compute_matrix().values
                means.append(values[np.triu_indices(8, k=1)].mean())
            assert means[0] > means[1] > means[2]

    def test_full_class_draw_approaches_global_mix(self):
        # k equal to the class count is statistically IID: with 1000+
        # samples per client every pairwise distance collapses below 0.1.
        data = generate_synthetic(4, 1300, 3, seed=7, noise_sigma=0.5)
        parts = partition(data, 4, mode="noniid", classes_per_client=4, seed=7)
        oracle = SimilarityOracle(range(4), 4)
        for p in parts:
            assert len(p.sample_indices) >= 1000
            oracle.submit(
                ClassCountSubmission(
                    client_id=p.client_id,
                    counts=tuple(int(x) for x in p.class_counts),
                )
            )
        values = oracle.compute_matrix().values
        off_diagonal = values[np.triu_indices(4, k=1)]
        assert float(off_diagonal.max()) < 0.1
