import numpy as np
import pytest

from classpulse.clustering import (
    DimensionMismatch,
    KTooLarge,
    kmeanspp_seed,
    lloyd_cluster,
)


def brute_force_inertia(points: np.ndarray, centroids: np.ndarray) -> float:
    """Oracle: enumerate every point-to-centroid assignment explicitly."""
    total = 0.0
    for p in points:
        total += min(float(np.sum((p - c) ** 2)) for c in centroids)
    return total


class TestSeeding:
    def test_k1_uniform_and_reproducible(self):
        points = np.array([[0.0], [5.0], [9.0]])
        a = kmeanspp_seed(points, 1, np.random.default_rng(7))
        b = kmeanspp_seed(points, 1, np.random.default_rng(7))
        assert np.array_equal(a, b)
        assert any(np.array_equal(a[0], p) for p in points)

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            kmeanspp_seed(np.zeros((3, 2)), 4, np.random.default_rng(0))
        with pytest.raises(KTooLarge):
            kmeanspp_seed(np.zeros((3, 2)), 0, np.random.default_rng(0))

    def test_separates_two_tight_pairs(self):
        # Monte-Carlo oracle: over 10,000 seeds, the two centroids should land
        # in different pairs essentially always (D^2 weighting).
        points = np.array([[0.0, 0.0], [0.0, 1.0], [100.0, 100.0], [100.0, 101.0]])
        hits = 0
        for seed in range(10_000):
            cents = kmeanspp_seed(points, 2, np.random.default_rng(seed))
            sides = {int(c[0] > 50.0) for c in cents}
            if len(sides) == 2:
                hits += 1
        assert hits / 10_000 >= 0.99

    def test_identical_points_fall_back_to_uniform(self):
        points = np.ones((5, 3))
        cents = kmeanspp_seed(points, 2, np.random.default_rng(3))
        assert cents.shape == (2, 3)
        assert np.array_equal(cents[0], cents[1])

    def test_duplicates_without_replacement(self):
        points = np.array([[1.0], [1.0], [1.0]])
        cents = kmeanspp_seed(points, 3, np.random.default_rng(11))
        assert cents.shape == (3, 1)


class TestLloyd:
    def test_one_dimensional_instance(self):
        points = np.array([[0.0], [1.0], [9.0], [10.0]])
        result = lloyd_cluster(points, np.array([[0.0], [10.0]]))
        assert sorted(c[0] for c in result.centroids) == pytest.approx([0.5, 9.5], abs=1e-9)
        assert result.inertia == pytest.approx(1.0, abs=1e-9)
        # exhaustive assignment enumeration agrees
        assert result.inertia == pytest.approx(
            brute_force_inertia(points, result.centroids), abs=1e-12
        )

    def test_fixed_point_converges_immediately(self):
        points = np.array([[0.0, 0.0], [4.0, 4.0], [9.0, 0.0]])
        result = lloyd_cluster(points, points.copy())
        assert result.inertia == 0.0
        assert sorted(result.assignments.tolist()) == [0, 1, 2]

    def test_max_iters_zero_returns_initial_assignment(self):
        points = np.array([[0.0], [1.0], [9.0], [10.0]])
        init = np.array([[2.0], [8.0]])
        result = lloyd_cluster(points, init, max_iters=0)
        assert np.array_equal(result.centroids, init)
        assert result.assignments.tolist() == [0, 0, 1, 1]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            lloyd_cluster(np.zeros((4, 2)), np.zeros((2, 3)))

    def test_empty_cluster_reseeded(self):
        points = np.array([[0.0], [0.1], [0.2], [10.0]])
        # Both seeds near the left mass: one cluster would go empty without reseeding.
        result = lloyd_cluster(points, np.array([[0.0], [-50.0]]))
        assert len(set(result.assignments.tolist())) == 2

    def test_inertia_non_increasing_on_random_instances(self):
        rng = np.random.default_rng(0)
        for trial in range(200):
            n = int(rng.integers(3, 30))
            d = int(rng.integers(1, 5))
            k = int(rng.integers(1, min(n, 6) + 1))
            points = rng.normal(size=(n, d)) * rng.uniform(0.5, 20)
            seeds = kmeanspp_seed(points, k, rng)
            # lloyd_cluster asserts the invariant internally at every step
            result = lloyd_cluster(points, seeds)
            assert result.inertia >= 0.0
            assert result.inertia == pytest.approx(
                brute_force_inertia(points, result.centroids), rel=1e-9, abs=1e-9
            )

    def test_final_assignment_is_nearest_centroid(self):
        rng = np.random.default_rng(42)
        points = rng.normal(size=(40, 3))
        result = lloyd_cluster(points, kmeanspp_seed(points, 4, rng))
        for i, p in enumerate(points):
            dists = [float(np.sum((p - c) ** 2)) for c in result.centroids]
            assert dists[result.assignments[i]] == pytest.approx(min(dists), abs=1e-12)

    def test_deterministic_given_seed(self):
        points = np.random.default_rng(5).normal(size=(25, 4))
        a = lloyd_cluster(points, kmeanspp_seed(points, 3, np.random.default_rng(9)))
        b = lloyd_cluster(points, kmeanspp_seed(points, 3, np.random.default_rng(9)))
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.assignments, b.assignments)
        assert a.inertia == b.inertia
