"""Tests for WGS84 geodesics and the azimuth/distance pixel baseline."""

import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisfusion.geodesy import (
    AzimuthCalibration,
    AzimuthDistance,
    GeodesicConvergenceError,
    GeoPoint,
    forward_geodesic,
    interp_pixel_to_world,
    inverse_geodesic,
)
from aisfusion.projective import PixelPoint

DATA = Path(__file__).parent / "data"

# Coordinates well inside the oracle disc (harbor scale).
harbor_lats = st.floats(min_value=53.0, max_value=54.0)
harbor_lons = st.floats(min_value=9.0, max_value=10.8)


@pytest.fixture(scope="module")
def oracle_pairs():
    doc = json.loads((DATA / "geodesic_oracle.json").read_text())
    return doc["pairs"]


class TestGeoPoint:
    def test_lat_range_enforced(self):
        with pytest.raises(ValueError):
            GeoPoint(90.5, 0.0)

    def test_lon_normalized(self):
        assert GeoPoint(0.0, 190.0).lon == -170.0
        assert GeoPoint(0.0, 180.0).lon == -180.0
        assert GeoPoint(0.0, -180.0).lon == -180.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            GeoPoint(float("nan"), 0.0)


class TestInverseGeodesic:
    def test_coincident_points_convention(self):
        p = GeoPoint(53.54388, 9.91692)
        ad = inverse_geodesic(p, p)
        assert ad.distance == 0.0
        assert ad.azimuth == 0.0

    def test_due_east_at_latitude(self):
        ad = inverse_geodesic(GeoPoint(53.0, 9.0), GeoPoint(53.0, 9.0001))
        assert ad.azimuth == pytest.approx(90.0, abs=0.01)

    def test_matches_oracle_anchor_pair(self, oracle_pairs):
        lat1, lon1, lat2, lon2, az, dist = oracle_pairs[0]
        assert (lat1, lon1, lat2, lon2) == (53.54553, 9.96957, 53.54387, 9.94275)
        ad = inverse_geodesic(GeoPoint(lat1, lon1), GeoPoint(lat2, lon2))
        assert ad.distance == pytest.approx(dist, abs=1e-3)
        assert ad.azimuth == pytest.approx(az, abs=1e-6)

    def test_near_antipodal_raises_not_lies(self):
        with pytest.raises(GeodesicConvergenceError):
            inverse_geodesic(GeoPoint(0.0, 0.0), GeoPoint(0.5, 179.7))

    @given(harbor_lats, harbor_lons, harbor_lats, harbor_lons)
    @settings(max_examples=200, deadline=None)
    def test_distance_symmetry(self, lat1, lon1, lat2, lon2):
        a, b = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2)
        d_ab = inverse_geodesic(a, b).distance
        d_ba = inverse_geodesic(b, a).distance
        assert d_ab == pytest.approx(d_ba, rel=1e-9, abs=1e-9)

    @given(
        harbor_lats, harbor_lons, harbor_lats, harbor_lons, harbor_lats, harbor_lons
    )
    @settings(max_examples=100, deadline=None)
    def test_triangle_inequality(self, lat1, lon1, lat2, lon2, lat3, lon3):
        a, b, c = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2), GeoPoint(lat3, lon3)
        d_ac = inverse_geodesic(a, c).distance
        d_ab = inverse_geodesic(a, b).distance
        d_bc = inverse_geodesic(b, c).distance
        assert d_ac <= (d_ab + d_bc) * (1 + 1e-6) + 1e-9


class TestForwardGeodesic:
    def test_zero_distance_is_identity(self):
        p = GeoPoint(53.0, 9.0)
        assert forward_geodesic(p, 123.0, 0.0) == p

    def test_due_north_keeps_longitude(self):
        p = forward_geodesic(GeoPoint(53.0, 9.0), 0.0, 1000.0)
        assert p.lat > 53.0
        assert p.lon == pytest.approx(9.0, abs=1e-9)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            forward_geodesic(GeoPoint(53.0, 9.0), 0.0, -1.0)

    def test_over_half_circumference_rejected(self):
        with pytest.raises(ValueError):
            forward_geodesic(GeoPoint(53.0, 9.0), 0.0, 2.1e7)

    def test_round_trip_forward_then_inverse(self):
        # 100 random bearing/distance draws around the harbor, < 50 km.
        import random

        rng = random.Random(42)
        for _ in range(100):
            start = GeoPoint(rng.uniform(53.0, 54.0), rng.uniform(9.0, 10.5))
            bearing = rng.uniform(0.0, 360.0)
            distance = rng.uniform(1.0, 50_000.0)
            end = forward_geodesic(start, bearing, distance)
            ad = inverse_geodesic(start, end)
            assert ad.distance == pytest.approx(distance, abs=1e-3)
            d_az = abs(ad.azimuth - bearing) % 360.0
            assert min(d_az, 360.0 - d_az) < 1e-6

    @given(harbor_lats, harbor_lons, harbor_lats, harbor_lons)
    @settings(max_examples=100, deadline=None)
    def test_round_trip_inverse_then_forward(self, lat1, lon1, lat2, lon2):
        a, b = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2)
        ad = inverse_geodesic(a, b)
        back = forward_geodesic(a, ad.azimuth, ad.distance)
        assert back.lat == pytest.approx(b.lat, abs=1e-9)
        assert back.lon == pytest.approx(b.lon, abs=1e-9)


def _consistent_calibration(camera, left_az, right_az, width, pixels):
    """Keypoints whose azimuths follow the linear column model exactly."""
    keypoints = []
    span = (right_az - left_az) % 360.0
    for (x, y), dist in pixels:
        az = (left_az + span * x / (width - 1.0)) % 360.0
        keypoints.append((PixelPoint(x, y), AzimuthDistance(az, dist)))
    return AzimuthCalibration(camera, left_az, right_az, keypoints)


class TestInterpPixelToWorld:
    CAMERA = GeoPoint(53.54388, 9.91692)

    def test_midpoint_azimuth(self):
        cal = _consistent_calibration(
            self.CAMERA, 90.0, 180.0, 1001,
            [((0.0, 500.0), 400.0), ((1000.0, 500.0), 600.0)],
        )
        result = interp_pixel_to_world(cal, PixelPoint(500.0, 500.0), 1001)
        assert result.azimuth == pytest.approx(135.0, abs=1e-12)

    def test_keypoint_reproduced(self):
        pixels = [((100.0, 400.0), 350.0), ((900.0, 420.0), 800.0), ((500.0, 600.0), 500.0)]
        cal = _consistent_calibration(self.CAMERA, 120.0, 200.0, 1280, pixels)
        result = interp_pixel_to_world(cal, PixelPoint(100.0, 400.0), 1280)
        expected = forward_geodesic(self.CAMERA, cal.keypoints[0][1].azimuth, 350.0)
        d = inverse_geodesic(result.position, expected).distance
        assert d < 1.0

    def test_matches_idw_oracle_on_grid(self):
        # 10 keypoints on a regular grid; brute-force IDW recomputation.
        pixels = []
        for i, x in enumerate((100.0, 300.0, 500.0, 700.0, 900.0)):
            for j, y in enumerate((200.0, 600.0)):
                pixels.append(((x, y), 300.0 + 40.0 * i + 25.0 * j))
        cal = _consistent_calibration(self.CAMERA, 100.0, 220.0, 1280, pixels)

        query = PixelPoint(412.0, 377.0)
        result = interp_pixel_to_world(cal, query, 1280)

        num = den = 0.0
        for (x, y), dist in pixels:
            w = 1.0 / ((query.x - x) ** 2 + (query.y - y) ** 2)
            num += w * dist
            den += w
        assert result.distance == pytest.approx(num / den, abs=0.0)
        assert result.extrapolated is False

    def test_extrapolation_flagged_outside_hull(self):
        pixels = [((400.0, 300.0), 400.0), ((800.0, 300.0), 500.0),
                  ((600.0, 500.0), 450.0)]
        cal = _consistent_calibration(self.CAMERA, 100.0, 220.0, 1280, pixels)
        inside = interp_pixel_to_world(cal, PixelPoint(600.0, 360.0), 1280)
        outside = interp_pixel_to_world(cal, PixelPoint(100.0, 100.0), 1280)
        assert inside.extrapolated is False
        assert outside.extrapolated is True

    def test_azimuth_monotone_in_x(self):
        cal = _consistent_calibration(
            self.CAMERA, 90.0, 180.0, 1001,
            [((0.0, 500.0), 400.0), ((1000.0, 500.0), 600.0)],
        )
        azimuths = [
            interp_pixel_to_world(cal, PixelPoint(x, 500.0), 1001).azimuth
            for x in (0.0, 250.0, 500.0, 750.0, 1000.0)
        ]
        assert azimuths == sorted(azimuths)

    def test_x_out_of_range_rejected(self):
        cal = _consistent_calibration(
            self.CAMERA, 90.0, 180.0, 1001,
            [((0.0, 500.0), 400.0), ((1000.0, 500.0), 600.0)],
        )
        with pytest.raises(ValueError):
            interp_pixel_to_world(cal, PixelPoint(1001.0, 500.0), 1001)


class TestOracleAgreement:
    """Library inverse solver against the frozen high-precision oracle."""

    def test_all_pairs_within_tolerance(self, oracle_pairs):
        worst_d = worst_a = 0.0
        for lat1, lon1, lat2, lon2, az, dist in oracle_pairs:
            ad = inverse_geodesic(GeoPoint(lat1, lon1), GeoPoint(lat2, lon2))
            worst_d = max(worst_d, abs(ad.distance - dist))
            d_az = abs(ad.azimuth - az) % 360.0
            worst_a = max(worst_a, min(d_az, 360.0 - d_az))
        assert worst_d < 1e-3, f"distance off by {worst_d} m"
        assert worst_a < 1e-6, f"azimuth off by {worst_a} deg"
