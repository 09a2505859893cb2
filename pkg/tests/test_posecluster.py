import numpy as np
import pytest

from poseexpr.errors import (
    EmptyGroup,
    InsufficientSamples,
    NotEnoughDistinctValues,
)
from poseexpr.posecluster import (
    assign_pose,
    centroid_distances,
    compute_centroids,
    fit_pose_model,
    load_pose_model,
    pca_fit,
    project_first,
    save_pose_model,
    split_poses,
    threshold_class,
)
from poseexpr.shape import Shape, normalize


def eig_oracle(matrix):
    """Dense covariance eigendecomposition, descending order."""
    mean = matrix.mean(axis=0)
    cov = (matrix - mean).T @ (matrix - mean) / matrix.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    return mean, vals[order], vecs[:, order].T


class TestPca:
    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(0)
        matrix = rng.normal(0.0, 1.0, (20, 10))
        basis = pca_fit(matrix)
        mean, vals, vecs = eig_oracle(matrix)
        np.testing.assert_allclose(basis.mean, mean, atol=1e-8)
        np.testing.assert_allclose(basis.variances, vals, atol=1e-8)
        for got, want in zip(basis.axes, vecs):
            # eigenvectors match up to sign
            err = min(np.abs(got - want).max(), np.abs(got + want).max())
            assert err < 1e-8

    def test_gram_trick_agrees_with_direct_svd(self):
        # wide matrix triggers the M x M gram path; compare to the oracle
        rng = np.random.default_rng(1)
        matrix = rng.normal(0.0, 1.0, (12, 700))
        basis = pca_fit(matrix)
        mean, vals, vecs = eig_oracle(matrix)
        rank = 11  # M - 1 nonzero modes
        np.testing.assert_allclose(basis.variances[:rank], vals[:rank], atol=1e-8)
        for got, want in zip(basis.axes[:rank], vecs[:rank]):
            err = min(np.abs(got - want).max(), np.abs(got + want).max())
            assert err < 1e-7

    def test_axes_orthonormal(self):
        rng = np.random.default_rng(2)
        basis = pca_fit(rng.normal(0.0, 1.0, (30, 8)))
        gram = basis.axes @ basis.axes.T
        np.testing.assert_allclose(gram, np.eye(gram.shape[0]), atol=1e-10)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        basis = pca_fit(rng.normal(0.0, 1.0, (30, 8)))
        for axis in basis.axes:
            assert axis[np.argmax(np.abs(axis))] > 0

    def test_project_first_is_first_axis_coefficient(self):
        rng = np.random.default_rng(4)
        matrix = rng.normal(0.0, 1.0, (25, 6))
        basis = pca_fit(matrix)
        v = matrix[3]
        want = float((v - basis.mean) @ basis.axes[0])
        assert project_first(basis, v) == pytest.approx(want)


class TestSplitPoses:
    def test_even_split_midpoints(self):
        proj = np.arange(10, dtype=float)  # 0..9
        thr = split_poses(proj, 5)
        np.testing.assert_allclose(thr, [1.5, 3.5, 5.5, 7.5])

    def test_classes_equal_frequency(self):
        rng = np.random.default_rng(5)
        proj = rng.normal(0.0, 1.0, 1000)
        thr = split_poses(proj, 5)
        classes = [threshold_class(thr, p) for p in proj]
        counts = np.bincount(classes)[1:]
        np.testing.assert_array_equal(counts, [200] * 5)

    def test_k_one_empty_thresholds(self):
        assert split_poses(np.arange(4.0), 1).size == 0

    def test_too_few_distinct_values(self):
        with pytest.raises(NotEnoughDistinctValues):
            split_poses(np.array([1.0, 1.0, 1.0, 2.0]), 3)

    def test_threshold_class_boundaries(self):
        thr = np.array([0.0, 1.0])
        assert threshold_class(thr, -0.5) == 1
        # boundary values go to the upper class (right-side search)
        assert threshold_class(thr, 0.0) == 2
        assert threshold_class(thr, 0.5) == 2
        assert threshold_class(thr, 1.0) == 3


class TestCentroids:
    def make_cluster(self, rng, offset, n=10):
        base = rng.normal(0.0, 1.0, (6, 2)) + offset
        return [
            normalize(Shape(base + rng.normal(0.0, 0.01, base.shape)))
            for _ in range(n)
        ]

    def test_centroid_is_normalized_mean(self):
        rng = np.random.default_rng(6)
        group = self.make_cluster(rng, 0.0)
        [centroid] = compute_centroids([group])
        stack = np.stack([s.points for s in group])
        want = normalize(Shape(stack.mean(axis=0)))
        np.testing.assert_allclose(centroid.points, want.points, atol=1e-12)

    def test_empty_group_raises(self):
        with pytest.raises(EmptyGroup):
            compute_centroids([[]])

    def test_assign_pose_ties_break_low(self):
        rng = np.random.default_rng(7)
        sh = normalize(Shape(rng.normal(0.0, 1.0, (6, 2))))
        model = fit_pose_model(
            [normalize(Shape(rng.normal(0.0, 1.0, (6, 2)))) for _ in range(12)],
            k=2,
        )
        # duplicate centroid list forces an exact distance tie
        tied = type(model)(model.basis, 2, model.thresholds,
                           [model.centroids[0], model.centroids[0]])
        assert assign_pose(tied, sh) == 1

    def test_assign_pose_picks_nearest(self):
        rng = np.random.default_rng(8)
        shapes = [normalize(Shape(rng.normal(0.0, 1.0, (6, 2)))) for _ in range(40)]
        model = fit_pose_model(shapes, k=3)
        for sh in shapes[:10]:
            d = centroid_distances(model, sh)
            assert assign_pose(model, sh) == int(np.argmin(d)) + 1


class TestFitPoseModel:
    def fan_shapes(self, n=100, seed=9):
        # shapes varying along one dominant direction, so the first axis
        # tracks that direction
        rng = np.random.default_rng(seed)
        base = rng.normal(0.0, 1.0, (10, 2))
        direction = rng.normal(0.0, 1.0, (10, 2))
        ts = np.linspace(-1.0, 1.0, n)
        return ts, [
            normalize(Shape(base + t * direction + rng.normal(0.0, 0.003, (10, 2))))
            for t in ts
        ]

    def test_classes_track_dominant_direction(self):
        ts, shapes = self.fan_shapes()
        model = fit_pose_model(shapes, k=5)
        classes = np.array([assign_pose(model, s) for s in shapes])
        # classes must be monotone in t up to orientation
        diffs = np.diff(classes)
        assert np.all(diffs >= 0) or np.all(diffs <= 0)
        assert set(classes) == {1, 2, 3, 4, 5}

    def test_too_few_shapes(self):
        rng = np.random.default_rng(10)
        shapes = [normalize(Shape(rng.normal(0.0, 1.0, (6, 2)))) for _ in range(3)]
        with pytest.raises(InsufficientSamples):
            fit_pose_model(shapes, k=5)

    def test_round_trip_serialization(self, tmp_path):
        _, shapes = self.fan_shapes(60, seed=11)
        model = fit_pose_model(shapes, k=4)
        path = tmp_path / "pose.txt"
        save_pose_model(model, path)
        loaded = load_pose_model(path)
        assert loaded.k == model.k
        np.testing.assert_array_equal(loaded.thresholds, model.thresholds)
        np.testing.assert_array_equal(loaded.basis.mean, model.basis.mean)
        np.testing.assert_array_equal(loaded.basis.axes, model.basis.axes)
        np.testing.assert_array_equal(loaded.basis.variances, model.basis.variances)
        for a, b in zip(loaded.centroids, model.centroids):
            np.testing.assert_array_equal(a.points, b.points)
        # loaded model classifies identically
        for s in shapes[:10]:
            assert assign_pose(loaded, s) == assign_pose(model, s)
