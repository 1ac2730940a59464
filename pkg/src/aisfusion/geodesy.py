"""WGS84 ellipsoidal geodesy and the azimuth/distance camera baseline.

Distances and initial bearings between geographic points are computed on
the WGS84 ellipsoid with the classic iterative (Vincenty-style) solver in
both directions.  On top of that sits a simple camera-to-world transform
that maps a pixel column to an azimuth by linear interpolation between the
image edges and estimates range by inverse-distance weighting over
calibration keypoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

__all__ = [
    "WGS84_A",
    "WGS84_F",
    "WGS84_B",
    "GeoPoint",
    "AzimuthDistance",
    "AzimuthCalibration",
    "GeodesicConvergenceError",
    "inverse_geodesic",
    "forward_geodesic",
    "interp_pixel_to_world",
    "PixelToWorldResult",
]

# WGS84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)

# Half the equatorial circumference; forward problems beyond this are rejected.
_MAX_DISTANCE = math.pi * WGS84_A

_MAX_ITER = 200
_CONVERGENCE = 1e-13  # radians


class GeodesicConvergenceError(RuntimeError):
    """Iterative geodesic solver exceeded its iteration cap (near-antipodal pair)."""


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 position in degrees. Longitude is normalized to [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.lat) or not math.isfinite(self.lon):
            raise ValueError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        object.__setattr__(self, "lon", ((self.lon + 180.0) % 360.0) - 180.0)


@dataclass(frozen=True)
class AzimuthDistance:
    """Initial bearing (degrees clockwise from true north, [0, 360)) and range in meters."""

    azimuth: float
    distance: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.azimuth < 360.0:
            raise ValueError(f"azimuth {self.azimuth} outside [0, 360)")
        if self.distance < 0.0:
            raise ValueError(f"negative distance {self.distance}")


@dataclass(frozen=True)
class AzimuthCalibration:
    """Per-camera calibration for the pixel-column-to-azimuth baseline.

    ``keypoints`` holds (pixel, azimuth/distance) pairs; the azimuth anchors
    for the image edges are stored separately so the column interpolation
    does not depend on keypoint coverage near the borders.
    """

    camera_location: GeoPoint
    left_edge_azimuth: float
    right_edge_azimuth: float
    keypoints: list[tuple["PixelPointLike", AzimuthDistance]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.keypoints) < 2:
            raise ValueError("calibration needs at least 2 keypoints")


@dataclass(frozen=True)
class PixelToWorldResult:
    """World position recovered from a pixel, with the intermediate polar terms."""

    position: GeoPoint
    azimuth: float
    distance: float
    extrapolated: bool


class PixelPointLike(Protocol):
    """Anything with float ``x``/``y`` attributes (see :class:`aisfusion.projective.PixelPoint`)."""

    x: float
    y: float


def inverse_geodesic(a: GeoPoint, b: GeoPoint) -> AzimuthDistance:
    """Solve the geodesic inverse problem a -> b on the WGS84 ellipsoid.

    Returns the ellipsoidal distance in meters and the initial bearing at
    ``a`` in degrees clockwise from true north.  Coincident points return
    (azimuth 0, distance 0) by convention.

    Raises:
        GeodesicConvergenceError: the iteration cap was hit, which happens
            for near-antipodal pairs; an explicit error is preferred over a
            silently wrong number.
    """
    if a.lat == b.lat and a.lon == b.lon:
        return AzimuthDistance(0.0, 0.0)

    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    big_l = math.radians(((b.lon - a.lon) + 180.0) % 360.0 - 180.0)

    u1 = math.atan((1.0 - WGS84_F) * math.tan(phi1))
    u2 = math.atan((1.0 - WGS84_F) * math.tan(phi2))
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    lam = big_l
    for _ in range(_MAX_ITER):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.hypot(
            cos_u2 * sin_lam, cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam
        )
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        if sin_sigma == 0.0:
            # Numerically coincident after reduction to the auxiliary sphere.
            return AzimuthDistance(0.0, 0.0)
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos_sq_alpha = 1.0 - sin_alpha * sin_alpha
        if cos_sq_alpha == 0.0:
            cos_2sigma_m = 0.0  # equatorial line
        else:
            cos_2sigma_m = cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha
        c = WGS84_F / 16.0 * cos_sq_alpha * (4.0 + WGS84_F * (4.0 - 3.0 * cos_sq_alpha))
        lam_prev = lam
        lam = big_l + (1.0 - c) * WGS84_F * sin_alpha * (
            sigma
            + c
            * sin_sigma
            * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2))
        )
        if abs(lam - lam_prev) < _CONVERGENCE:
            break
    else:
        raise GeodesicConvergenceError(
            f"inverse geodesic did not converge in {_MAX_ITER} iterations "
            f"for {a} -> {b} (near-antipodal?)"
        )

    u_sq = cos_sq_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    big_a = 1.0 + u_sq / 16384.0 * (
        4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq))
    )
    big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))
    delta_sigma = (
        big_b
        * sin_sigma
        * (
            cos_2sigma_m
            + big_b
            / 4.0
            * (
                cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2)
                - big_b
                / 6.0
                * cos_2sigma_m
                * (-3.0 + 4.0 * sin_sigma**2)
                * (-3.0 + 4.0 * cos_2sigma_m**2)
            )
        )
    )
    distance = WGS84_B * big_a * (sigma - delta_sigma)

    alpha1 = math.atan2(
        cos_u2 * math.sin(lam), cos_u1 * sin_u2 - sin_u1 * cos_u2 * math.cos(lam)
    )
    azimuth = math.degrees(alpha1) % 360.0
    return AzimuthDistance(azimuth, distance)


def forward_geodesic(a: GeoPoint, bearing: float, distance: float) -> GeoPoint:
    """Solve the geodesic direct problem: travel ``distance`` meters from ``a``
    along initial ``bearing`` degrees (clockwise from true north).

    Raises:
        ValueError: negative distance or distance beyond half the equatorial
            circumference, where the shortest-path framing stops making sense.
        GeodesicConvergenceError: the sigma iteration hit its cap.
    """
    if distance < 0.0:
        raise ValueError(f"negative distance {distance}")
    if distance > _MAX_DISTANCE:
        raise ValueError(
            f"distance {distance} m exceeds half the ellipsoid circumference "
            f"({_MAX_DISTANCE:.0f} m)"
        )
    if distance == 0.0:
        return a

    alpha1 = math.radians(bearing % 360.0)
    sin_alpha1, cos_alpha1 = math.sin(alpha1), math.cos(alpha1)

    phi1 = math.radians(a.lat)
    u1 = math.atan((1.0 - WGS84_F) * math.tan(phi1))
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)

    sigma1 = math.atan2(math.tan(u1), cos_alpha1)
    sin_alpha = cos_u1 * sin_alpha1
    cos_sq_alpha = 1.0 - sin_alpha * sin_alpha
    u_sq = cos_sq_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    big_a = 1.0 + u_sq / 16384.0 * (
        4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq))
    )
    big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))

    sigma = distance / (WGS84_B * big_a)
    for _ in range(_MAX_ITER):
        cos_2sigma_m = math.cos(2.0 * sigma1 + sigma)
        sin_sigma, cos_sigma = math.sin(sigma), math.cos(sigma)
        delta_sigma = (
            big_b
            * sin_sigma
            * (
                cos_2sigma_m
                + big_b
                / 4.0
                * (
                    cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2)
                    - big_b
                    / 6.0
                    * cos_2sigma_m
                    * (-3.0 + 4.0 * sin_sigma**2)
                    * (-3.0 + 4.0 * cos_2sigma_m**2)
                )
            )
        )
        sigma_prev = sigma
        sigma = distance / (WGS84_B * big_a) + delta_sigma
        if abs(sigma - sigma_prev) < _CONVERGENCE:
            break
    else:
        raise GeodesicConvergenceError(
            f"forward geodesic did not converge in {_MAX_ITER} iterations"
        )

    sin_sigma, cos_sigma = math.sin(sigma), math.cos(sigma)
    cos_2sigma_m = math.cos(2.0 * sigma1 + sigma)
    phi2 = math.atan2(
        sin_u1 * cos_sigma + cos_u1 * sin_sigma * cos_alpha1,
        (1.0 - WGS84_F)
        * math.hypot(
            sin_alpha, sin_u1 * sin_sigma - cos_u1 * cos_sigma * cos_alpha1
        ),
    )
    lam = math.atan2(
        sin_sigma * sin_alpha1, cos_u1 * cos_sigma - sin_u1 * sin_sigma * cos_alpha1
    )
    c = WGS84_F / 16.0 * cos_sq_alpha * (4.0 + WGS84_F * (4.0 - 3.0 * cos_sq_alpha))
    big_l = lam - (1.0 - c) * WGS84_F * sin_alpha * (
        sigma
        + c * sin_sigma * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2))
    )
    lon2 = a.lon + math.degrees(big_l)
    return GeoPoint(math.degrees(phi2), lon2)


def _azimuth_at(cal: AzimuthCalibration, x: float, image_width: int) -> float:
    # Clockwise sweep from the left edge; span wraps through north if needed.
    span = (cal.right_edge_azimuth - cal.left_edge_azimuth) % 360.0
    t = x / (image_width - 1.0)
    return (cal.left_edge_azimuth + t * span) % 360.0


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone-chain convex hull; returns < 3 points for degenerate input."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, p, q):
        return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _inside_hull(hull: list[tuple[float, float]], x: float, y: float) -> bool:
    if len(hull) < 3:
        # Degenerate hull (all keypoints collinear): only the segment itself counts.
        if len(hull) == 1:
            return math.hypot(x - hull[0][0], y - hull[0][1]) < 1e-9
        (x1, y1), (x2, y2) = hull[0], hull[-1]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if abs(cross) > 1e-9:
            return False
        dot = (x - x1) * (x2 - x1) + (y - y1) * (y2 - y1)
        return -1e-9 <= dot <= (x2 - x1) ** 2 + (y2 - y1) ** 2 + 1e-9
    for i in range(len(hull)):
        x1, y1 = hull[i]
        x2, y2 = hull[(i + 1) % len(hull)]
        if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) < -1e-9:
            return False
    return True


def interp_pixel_to_world(
    cal: AzimuthCalibration, p: "PixelPointLike", image_width: int
) -> PixelToWorldResult:
    """Map a pixel to a world position via the azimuth/distance baseline.

    The azimuth comes from linear interpolation of the pixel column between
    the calibrated image-edge azimuths; the range comes from inverse-distance
    weighting (power 2) of the calibration keypoints in pixel space.  Queries
    outside the convex hull of the keypoints are still answered but flagged
    ``extrapolated``.
    """
    if not cal.keypoints:
        raise ValueError("calibration has no keypoints")
    if not 0.0 <= p.x < image_width:
        raise ValueError(f"pixel x {p.x} outside [0, {image_width})")

    azimuth = _azimuth_at(cal, p.x, image_width)

    # Inverse-distance weighting, power 2; an exact node hit short-circuits.
    distance = None
    weight_sum = 0.0
    weighted = 0.0
    for pix, ad in cal.keypoints:
        d_sq = (p.x - pix.x) ** 2 + (p.y - pix.y) ** 2
        if d_sq < 1e-18:
            distance = ad.distance
            break
        w = 1.0 / d_sq
        weight_sum += w
        weighted += w * ad.distance
    if distance is None:
        distance = weighted / weight_sum

    hull = _convex_hull([(kp.x, kp.y) for kp, _ in cal.keypoints])
    extrapolated = not _inside_hull(hull, p.x, p.y)

    position = forward_geodesic(cal.camera_location, azimuth, distance)
    return PixelToWorldResult(position, azimuth, distance, extrapolated)
