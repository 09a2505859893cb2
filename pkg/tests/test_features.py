import math

import numpy as np
import pytest

from poseexpr.errors import (
    ImageTooSmall,
    PatchOutOfImage,
    PointOutOfImage,
    RegionOutOfImage,
    WrongPointCount,
)
from poseexpr.features import _kern_loops, _kern_numpy
from poseexpr.features.geom import geometric_feature
from poseexpr.features.image import GrayImage, image_gradients
from poseexpr.features.lbp import (
    TplbpParams,
    landmark_face_regions,
    lbp_code,
    tplbp_code,
    tplbp_grid_feature,
    tplbp_region_feature,
)
from poseexpr.features.matrixio import load_feature_matrix, save_feature_matrix
from poseexpr.features.reduce import (
    load_reducer,
    pca_reduce_apply,
    pca_reduce_fit,
    save_reducer,
)
from poseexpr.features.sift import (
    SiftParams,
    default_patch_radius,
    sift_descriptor_at,
    sift_face_feature,
)
from poseexpr.features.vector import combine_features, normalize_feature
from poseexpr.shape import Shape


def rand_image(rng, h=48, w=48):
    return GrayImage(rng.uniform(0.0, 1.0, (h, w)))


def rand_landmarks(rng, h=64, w=64):
    pts = np.column_stack([
        rng.uniform(8.0, w - 8.0, 68),
        rng.uniform(8.0, h - 8.0, 68),
    ])
    return Shape(pts)


class TestImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(np.full((4, 4), 1.5))

    def test_gradient_orientation_convention(self):
        # brightness increasing to the right: gradient east, orientation 0
        ramp = GrayImage(np.tile(np.linspace(0.0, 1.0, 16), (16, 1)))
        mag, ori = image_gradients(ramp)
        assert np.all(mag[5:-5, 5:-5] > 0)
        np.testing.assert_allclose(ori[5:-5, 5:-5], 0.0, atol=1e-12)
        # brightness increasing downward maps to 270 degrees (y axis is down)
        ramp_d = GrayImage(np.tile(np.linspace(0.0, 1.0, 16)[:, None], (1, 16)))
        _, ori_d = image_gradients(ramp_d)
        np.testing.assert_allclose(ori_d[5:-5, 5:-5], 1.5 * np.pi, atol=1e-12)

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            image_gradients(GrayImage(np.zeros((2, 5))))


class TestLbp:
    def test_single_bright_neighbor_sets_expected_bit(self):
        # neighbors are indexed counter-clockwise from east; y is down, so
        # "north" (bit 2) is one row up
        offsets = {0: (1, 0), 2: (0, -1), 4: (-1, 0), 6: (0, 1)}
        cardinals = set(offsets)
        for bit, (dx, dy) in offsets.items():
            px = np.full((5, 5), 0.5)
            px[2 + dy, 2 + dx] = 0.9
            code = lbp_code(GrayImage(px), 2, 2)
            # the matching cardinal bit fires; diagonal samples may pick up
            # part of the bright pixel through interpolation, but the other
            # cardinal directions must stay dark
            assert code & (1 << bit)
            for other in cardinals - {bit}:
                assert not code & (1 << other)

    def test_uniform_image_gives_zero(self):
        assert lbp_code(GrayImage(np.full((5, 5), 0.3)), 2, 2) == 0

    def test_strict_comparison(self):
        # equal neighbors contribute no bit
        px = np.full((5, 5), 0.4)
        px[2, 3] = 0.4
        assert lbp_code(GrayImage(px), 2, 2) == 0


def naive_tplbp_code(img, x, y, params):
    """Straight transcription of the three-patch rule, used as an oracle."""
    half = params.patch_size // 2
    s = params.patch_count

    def patch_dist(cx, cy):
        acc = 0.0
        for dv in range(-half, half + 1):
            for du in range(-half, half + 1):
                ring = _kern_loops.bilinear(img, cx + du, cy + dv)
                acc += (ring - img[y + dv, x + du]) ** 2
        return acc

    dists = []
    for i in range(s):
        ang = 2.0 * math.pi * i / s
        dists.append(patch_dist(x + params.ring_radius * math.cos(ang),
                                y - params.ring_radius * math.sin(ang)))
    code = 0
    for i in range(s):
        if dists[i] - dists[(i + params.alpha) % s] >= params.tau:
            code |= 1 << i
    return code


class TestTplbp:
    def test_code_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        img = rand_image(rng, 24, 24)
        params = TplbpParams()
        for x, y in [(6, 6), (10, 15), (17, 8), (12, 12)]:
            assert tplbp_code(img, x, y, params) == naive_tplbp_code(
                img.pixels, x, y, params
            )

    def test_code_out_of_margin_raises(self):
        rng = np.random.default_rng(1)
        with pytest.raises(PatchOutOfImage):
            tplbp_code(rand_image(rng, 24, 24), 1, 1)

    def test_grid_feature_dimension_and_conservation(self):
        rng = np.random.default_rng(2)
        img = rand_image(rng, 40, 40)
        params = TplbpParams()
        feat = tplbp_grid_feature(img, params)
        assert feat.family == "tplbp_grid"
        assert feat.values.size == 4 * 4 * 256
        m = params.margin
        valid = (40 - 2 * m) ** 2
        # every codeable pixel lands in exactly one cell histogram
        assert feat.values.sum() == pytest.approx(valid)

    def test_grid_too_small(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ImageTooSmall):
            tplbp_grid_feature(rand_image(rng, 16, 16))

    def test_region_feature_counts(self):
        rng = np.random.default_rng(4)
        img = rand_image(rng, 40, 40)
        params = TplbpParams()
        m = params.margin
        regions = [(0, 0, 20, 20), (10, 10, 30, 30)]
        feat = tplbp_region_feature(img, regions, params)
        assert feat.family == "tplbp_region"
        assert feat.values.size == 2 * 256
        for i, (x0, y0, x1, y1) in enumerate(regions):
            w = min(x1, 40 - m) - max(x0, m)
            h = min(y1, 40 - m) - max(y0, m)
            assert feat.values[i * 256 : (i + 1) * 256].sum() == pytest.approx(w * h)

    def test_region_outside_raises(self):
        rng = np.random.default_rng(5)
        img = rand_image(rng, 40, 40)
        with pytest.raises(RegionOutOfImage):
            tplbp_region_feature(img, [(-1, 0, 10, 10)])
        with pytest.raises(RegionOutOfImage):
            # entirely inside the margin band: no codeable pixel
            tplbp_region_feature(img, [(0, 0, 3, 3)])

    def test_landmark_regions_cover_landmarks(self):
        rng = np.random.default_rng(6)
        img = rand_image(rng, 64, 64)
        lm = rand_landmarks(rng)
        rects = landmark_face_regions(lm, img)
        assert len(rects) == 6
        for x0, y0, x1, y1 in rects:
            assert 0 <= x0 < x1 <= 64 and 0 <= y0 < y1 <= 64


class TestSift:
    def test_face_feature_dimension(self):
        rng = np.random.default_rng(7)
        img = rand_image(rng, 64, 64)
        lm = rand_landmarks(rng)
        feat = sift_face_feature(img, lm)
        assert feat.family == "sift"
        assert feat.values.size == 8704

    def test_descriptor_unit_norm(self):
        rng = np.random.default_rng(8)
        img = rand_image(rng, 64, 64)
        d = sift_descriptor_at(img, (32.0, 32.0), SiftParams(patch_radius=8.0))
        assert d.size == 128
        assert np.linalg.norm(d) == pytest.approx(1.0)
        assert d.max() <= 0.2 + 1e-12

    def test_flat_image_gives_zero_descriptor(self):
        img = GrayImage(np.full((32, 32), 0.5))
        d = sift_descriptor_at(img, (16.0, 16.0), SiftParams(patch_radius=8.0))
        np.testing.assert_array_equal(d, 0.0)

    def test_border_keypoint_does_not_crash(self):
        rng = np.random.default_rng(9)
        img = rand_image(rng, 32, 32)
        d = sift_descriptor_at(img, (0.0, 0.0), SiftParams(patch_radius=8.0))
        assert np.isfinite(d).all()

    def test_point_outside_raises(self):
        rng = np.random.default_rng(10)
        with pytest.raises(PointOutOfImage):
            sift_descriptor_at(rand_image(rng, 32, 32), (40.0, 2.0),
                               SiftParams(patch_radius=8.0))

    def test_default_radius_tracks_scale(self):
        rng = np.random.default_rng(11)
        lm = rand_landmarks(rng)
        r1 = default_patch_radius(lm)
        r2 = default_patch_radius(Shape(lm.points * 2.0))
        assert 6.0 <= r1 <= 24.0
        assert r2 >= r1

    def test_wrong_point_count(self):
        rng = np.random.default_rng(12)
        with pytest.raises(WrongPointCount):
            sift_face_feature(rand_image(rng), Shape(np.zeros((10, 2)) + 5.0))


class TestBackendAgreement:
    """The numba loop kernels and the vectorized numpy kernels must agree."""

    def test_tplbp_maps_identical(self):
        rng = np.random.default_rng(13)
        img = rng.uniform(0.0, 1.0, (36, 30))
        a = _kern_loops.tplbp_code_map(img, 2.0, 8, 3, 2, 0.01)
        b = _kern_numpy.tplbp_code_map(img, 2.0, 8, 3, 2, 0.01)
        np.testing.assert_array_equal(a, b)

    def test_sift_descriptors_match(self):
        rng = np.random.default_rng(14)
        img = GrayImage(rng.uniform(0.0, 1.0, (40, 40)))
        mag, ori = image_gradients(img)
        for pt in [(20.0, 20.0), (3.5, 30.2), (0.0, 0.0), (39.0, 5.0)]:
            a = _kern_loops.sift_raw_descriptor(mag, ori, pt[0], pt[1], 8.0, 4, 8)
            b = _kern_numpy.sift_raw_descriptor(mag, ori, pt[0], pt[1], 8.0, 4, 8)
            np.testing.assert_allclose(a, b, atol=1e-12)


class TestGeomAndVector:
    def test_geometric_feature(self):
        rng = np.random.default_rng(15)
        lm = rand_landmarks(rng)
        feat = geometric_feature(lm)
        assert feat.family == "geom"
        assert feat.values.size == 136
        np.testing.assert_array_equal(feat.values, lm.as_vector())

    def test_geometric_wrong_count(self):
        with pytest.raises(WrongPointCount):
            geometric_feature(Shape(np.zeros((5, 2))))

    def test_normalize_feature(self):
        rng = np.random.default_rng(16)
        v = rng.normal(2.0, 1.0, 50)
        n = normalize_feature(v)
        assert n.mean() == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(n) == pytest.approx(1.0)

    def test_normalize_constant_vector(self):
        n = normalize_feature(np.full(10, 3.0))
        np.testing.assert_array_equal(n, 0.0)

    def test_combine(self):
        rng = np.random.default_rng(17)
        lm = rand_landmarks(rng)
        g = geometric_feature(lm)
        combined = combine_features([g, g])
        assert combined.family == "combined"
        assert combined.values.size == 272


class TestReduce:
    def test_retained_fraction(self):
        from poseexpr.posecluster import pca_fit

        rng = np.random.default_rng(18)
        samples = rng.normal(0.0, 1.0, (60, 20)) * np.linspace(3.0, 0.1, 20)
        red = pca_reduce_fit(samples, 0.95)
        variances = pca_fit(samples).variances
        kept = variances[: red.out_dim].sum()
        total = variances.sum()
        assert kept / total >= 0.95 - 1e-12
        # one fewer component would fall below the target
        assert (kept - variances[red.out_dim - 1]) / total < 0.95

    def test_apply_is_projection(self):
        rng = np.random.default_rng(19)
        samples = rng.normal(0.0, 1.0, (40, 12))
        red = pca_reduce_fit(samples, 0.9)
        v = samples[0]
        want = (v - red.mean) @ red.projection.T
        np.testing.assert_allclose(pca_reduce_apply(red, v), want, atol=1e-12)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(20)
        red = pca_reduce_fit(rng.normal(0.0, 1.0, (30, 10)), 0.9)
        path = tmp_path / "reducer.txt"
        save_reducer(red, path)
        loaded = load_reducer(path)
        assert loaded.out_dim == red.out_dim
        np.testing.assert_array_equal(loaded.mean, red.mean)
        np.testing.assert_array_equal(loaded.projection, red.projection)


class TestMatrixIo:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(21)
        m = rng.normal(0.0, 1.0, (7, 13))
        path = tmp_path / "feats.pxfm"
        save_feature_matrix(path, m, "sift")
        loaded, family = load_feature_matrix(path)
        assert family == "sift"
        np.testing.assert_array_equal(loaded, m)

    def test_corrupt_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.pxfm"
        path.write_bytes(b"not a matrix file")
        with pytest.raises(Exception):
            load_feature_matrix(path)
