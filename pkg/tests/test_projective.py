"""Tests for homography estimation, projection, and error reporting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisfusion.geodesy import GeoPoint
from aisfusion.projective import (
    Correspondence,
    DegenerateConfigurationError,
    Homography,
    PixelPoint,
    ProjectionError,
    apply_homography,
    estimate_homography,
    project_world_to_image,
    reprojection_report,
)


def world_like_homography(rng: np.random.Generator) -> np.ndarray:
    """A random invertible pixel->world map that keeps a 1280x720 frame's
    projections inside valid geographic ranges (like a fitted camera)."""
    angle = rng.uniform(-0.3, 0.3)
    scale_lat = rng.uniform(0.5, 2.0) * 1e-5
    scale_lon = rng.uniform(0.5, 2.0) * 1e-5
    affine = np.array(
        [
            [scale_lat * math.cos(angle), -scale_lat * math.sin(angle), 53.5 + rng.uniform(-0.1, 0.1)],
            [scale_lon * math.sin(angle), scale_lon * math.cos(angle), 9.9 + rng.uniform(-0.1, 0.1)],
            [0.0, 0.0, 1.0],
        ]
    )
    affine[2, :2] = rng.uniform(-1e-6, 1e-6, size=2)
    return affine


def sample_correspondences(h: np.ndarray, n: int, rng: np.random.Generator):
    corrs = []
    for _ in range(n):
        x, y = rng.uniform(0, 1280), rng.uniform(0, 720)
        vec = h @ np.array([x, y, 1.0])
        corrs.append(
            Correspondence(PixelPoint(x, y), GeoPoint(vec[0] / vec[2], vec[1] / vec[2]))
        )
    return corrs


class TestHomographyCanonicalization:
    def test_identity_fixed_points(self):
        corrs = [
            Correspondence(PixelPoint(x, y), GeoPoint(x, y))
            for x, y in [(0, 0), (1, 0), (0, 1), (1, 1)]
        ]
        h = estimate_homography(corrs)
        expected = np.eye(3) / np.sqrt(3.0)
        assert np.allclose(h.matrix, expected, atol=1e-12)

    def test_unit_frobenius_and_sign(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = rng.normal(size=(3, 3))
            h = Homography(m)
            assert np.linalg.norm(h.matrix) == pytest.approx(1.0, abs=1e-12)
            assert h.matrix[2, 2] >= 0.0

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            Homography(np.zeros((3, 3)))

    def test_singular_matrix_rejected(self):
        m = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.5, 1.0, 1.5]])
        with pytest.raises(ValueError):
            Homography(m)

    def test_scale_invariance_bit_identical_for_exact_scalings(self):
        # Truncating mantissas leaves headroom so lambda*h is exact; the
        # canonical forms must then agree to the bit.
        rng = np.random.default_rng(11)
        for _ in range(25):
            base = Homography(rng.normal(size=(3, 3))).matrix
            base = np.round(base * 2.0**45) / 2.0**45
            for lam in (-3.0, 0.5, 7.0):
                a = Homography(base)
                b = Homography(lam * base)
                assert np.array_equal(a.matrix, b.matrix)

    @given(st.floats(min_value=-100.0, max_value=100.0).filter(lambda v: abs(v) > 1e-3))
    @settings(max_examples=100, deadline=None)
    def test_scale_invariance_close_for_arbitrary_scalings(self, lam):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(3, 3))
        a, b = Homography(m), Homography(lam * m)
        assert np.allclose(a.matrix, b.matrix, atol=1e-12)


class TestEstimateHomography:
    def test_recovers_generator_noiseless(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            truth = Homography(world_like_homography(rng))
            corrs = sample_correspondences(truth.matrix, 8, rng)
            recovered = estimate_homography(corrs)
            assert np.max(np.abs(recovered.matrix - truth.matrix)) < 1e-6

    def test_too_few_points(self):
        rng = np.random.default_rng(0)
        truth = world_like_homography(rng)
        corrs = sample_correspondences(truth, 3, rng)
        with pytest.raises(DegenerateConfigurationError):
            estimate_homography(corrs)

    def test_collinear_points_degenerate(self):
        corrs = [
            Correspondence(PixelPoint(float(i), 2.0 * i), GeoPoint(53.0 + i * 1e-4, 9.0))
            for i in range(4)
        ]
        with pytest.raises(DegenerateConfigurationError):
            estimate_homography(corrs)

    def test_outlier_rejection_flag(self):
        rng = np.random.default_rng(23)
        truth = Homography(world_like_homography(rng))
        corrs = sample_correspondences(truth.matrix, 12, rng)
        bad = corrs[0]
        corrs[0] = Correspondence(
            PixelPoint(bad.image.x + 400.0, bad.image.y - 300.0), bad.world
        )
        plain = estimate_homography(corrs)
        robust = estimate_homography(corrs, reject_outliers=True)
        err_plain = np.max(np.abs(plain.matrix - truth.matrix))
        err_robust = np.max(np.abs(robust.matrix - truth.matrix))
        assert err_robust < err_plain
        assert err_robust < 1e-6


class TestApplyProject:
    def test_identity_apply(self):
        h = Homography(np.eye(3))
        g = apply_homography(h, PixelPoint(12.5, 7.25))
        assert (g.lat, g.lon) == (12.5, 7.25)

    def test_translation(self):
        m = np.array([[1.0, 0.0, 40.0], [0.0, 1.0, 5.0], [0.0, 0.0, 1.0]])
        g = apply_homography(Homography(m), PixelPoint(3.0, 4.0))
        assert g.lat == pytest.approx(43.0, abs=1e-12)
        assert g.lon == pytest.approx(9.0, abs=1e-12)

    def test_agrees_with_hand_rolled_multiply(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            h = Homography(world_like_homography(rng))
            x, y = rng.uniform(0, 1280), rng.uniform(0, 720)
            g = apply_homography(h, PixelPoint(x, y))
            m = h.matrix
            # independent scalar arithmetic, no numpy
            num_lat = m[0][0] * x + m[0][1] * y + m[0][2]
            num_lon = m[1][0] * x + m[1][1] * y + m[1][2]
            w = m[2][0] * x + m[2][1] * y + m[2][2]
            assert g.lat == pytest.approx(num_lat / w, abs=0.0)
            assert g.lon == pytest.approx(num_lon / w, abs=0.0)

    def test_identity_project(self):
        h = Homography(np.eye(3))
        p = project_world_to_image(h, GeoPoint(53.5, 9.9))
        assert (p.x, p.y) == pytest.approx((53.5, 9.9), abs=1e-12)

    def test_round_trip_100_points(self):
        rng = np.random.default_rng(37)
        h = Homography(world_like_homography(rng))
        for _ in range(100):
            p = PixelPoint(rng.uniform(0, 1280), rng.uniform(0, 720))
            g = apply_homography(h, p)
            back = project_world_to_image(h, g)
            assert back.x == pytest.approx(p.x, rel=1e-9, abs=1e-9)
            assert back.y == pytest.approx(p.y, rel=1e-9, abs=1e-9)

    def test_scaled_matrix_projects_identically(self):
        rng = np.random.default_rng(41)
        base = Homography(world_like_homography(rng)).matrix
        base = np.round(base * 2.0**45) / 2.0**45
        h1, h7 = Homography(base), Homography(7.0 * base)
        p = PixelPoint(640.0, 360.0)
        g1, g7 = apply_homography(h1, p), apply_homography(h7, p)
        assert (g1.lat, g1.lon) == (g7.lat, g7.lon)

    def test_point_at_infinity_raises(self):
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.01, 0.0, -1.0]])
        h = Homography(m)
        with pytest.raises(ProjectionError):
            apply_homography(h, PixelPoint(100.0, 0.0))


class TestReprojectionReport:
    def test_exact_fit_all_zero(self):
        rng = np.random.default_rng(43)
        truth = world_like_homography(rng)
        corrs = sample_correspondences(truth, 4, rng)
        h = estimate_homography(corrs)
        report = reprojection_report(h, corrs)
        assert report.max_error == pytest.approx(0.0, abs=1e-6)
        assert report.min_error == pytest.approx(0.0, abs=1e-6)
        assert report.mean_error == pytest.approx(0.0, abs=1e-6)
        assert report.std_dev == pytest.approx(0.0, abs=1e-6)
        assert report.keypoint_count == 4

    def test_report_row_format(self):
        rng = np.random.default_rng(44)
        truth = world_like_homography(rng)
        corrs = sample_correspondences(truth, 16, rng)
        report = reprojection_report(estimate_homography(corrs), corrs)
        # Table-style row: count printed, stats ordered.
        assert report.keypoint_count == 16
        assert report.min_error <= report.mean_error <= report.max_error
        assert "keypoints 16" in report.as_row()

    def test_noise_mean_error_monte_carlo(self):
        # Isotropic sigma=2 pixel noise on the image side of 50 keypoints;
        # the expected mean offset is sigma*sqrt(pi/2) ~ 2.51 px.
        for seed in range(100):
            rng = np.random.default_rng(seed)
            truth = Homography(world_like_homography(rng))
            corrs = sample_correspondences(truth.matrix, 50, rng)
            noisy = [
                Correspondence(
                    PixelPoint(c.image.x + rng.normal(0, 2.0), c.image.y + rng.normal(0, 2.0)),
                    c.world,
                )
                for c in corrs
            ]
            report = reprojection_report(truth, noisy)
            assert 1.5 <= report.mean_error <= 3.5

    def test_stats_ordering_property(self):
        rng = np.random.default_rng(45)
        truth = Homography(world_like_homography(rng))
        corrs = sample_correspondences(truth.matrix, 20, rng)
        noisy = [
            Correspondence(
                PixelPoint(c.image.x + rng.normal(0, 5.0), c.image.y + rng.normal(0, 5.0)),
                c.world,
            )
            for c in corrs
        ]
        report = reprojection_report(truth, noisy)
        assert 0.0 <= report.min_error <= report.mean_error <= report.max_error
        assert report.std_dev >= 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reprojection_report(Homography(np.eye(3)), [])
