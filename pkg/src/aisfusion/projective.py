"""Homography estimation and bidirectional image<->world projection.

The camera-to-map transform is a 3x3 projective matrix taking homogeneous
image coordinates ``(x, y, 1)`` to scaled world coordinates
``(w*lat, w*lon, w)``; dividing by the scale factor ``w`` yields latitude
and longitude.  Latitude/longitude are treated as planar coordinates for
the fit, which is adequate at harbor scene scales (below ~10 km).

Matrices are stored in a canonical normalization (unit Frobenius norm,
sign fixed) so that two estimates of the same map compare equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geodesy import GeoPoint

__all__ = [
    "PixelPoint",
    "Correspondence",
    "Homography",
    "ReprojectionReport",
    "DegenerateConfigurationError",
    "ProjectionError",
    "estimate_homography",
    "apply_homography",
    "project_world_to_image",
    "reprojection_report",
]

# Homogeneous scale factors below this are treated as points at infinity.
W_TOLERANCE = 1e-12


class DegenerateConfigurationError(ValueError):
    """The correspondences do not determine a homography (rank-deficient fit)."""


class ProjectionError(ValueError):
    """A point maps to infinity or outside the valid geographic range."""


@dataclass(frozen=True)
class PixelPoint:
    """Continuous image coordinates, origin at the top-left corner."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite pixel coordinates ({self.x}, {self.y})")


@dataclass(frozen=True)
class Correspondence:
    """A hand-picked keypoint pair: where a world feature appears in the image."""

    image: PixelPoint
    world: GeoPoint


class Homography:
    """Invertible 3x3 projective map image -> world, defined up to scale.

    The stored matrix is canonicalized: scaled to unit Frobenius norm with
    the sign chosen so the bottom-right element is non-negative (falling
    back to the first nonzero element when that one is exactly zero).
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray) -> None:
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("homography contains non-finite elements")
        if not m.any():
            raise ValueError("homography is the zero matrix")
        # Two-stage normalization: dividing by the dominant element first makes
        # the result bit-identical across exact rescalings of the input (the
        # quotients of lambda*h cancel lambda under correct rounding), after
        # which the Frobenius scaling sees identical operands.
        dominant = m.flat[int(np.argmax(np.abs(m)))]
        m = m / dominant
        m = m / np.linalg.norm(m)
        if m[2, 2] != 0.0:
            sign = np.sign(m[2, 2])
        else:
            flat = m.ravel()
            sign = np.sign(flat[np.nonzero(flat)[0][0]])
        m = m * sign
        if abs(np.linalg.det(m)) < 1e-15:
            raise ValueError("homography is singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Homography is immutable")

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __repr__(self) -> str:
        rows = "; ".join(
            " ".join(f"{v:+.6f}" for v in row) for row in self.matrix
        )
        return f"Homography([{rows}])"


@dataclass(frozen=True)
class ReprojectionReport:
    """Pixel-space keypoint error summary for a fitted homography.

    ``failed_count`` keypoints could not be projected (mapped to infinity)
    and are excluded from the statistics.
    """

    max_error: float
    min_error: float
    mean_error: float
    std_dev: float
    keypoint_count: int
    failed_count: int = 0

    def as_row(self) -> str:
        return (
            f"max {self.max_error:.2f} px, min {self.min_error:.2f} px, "
            f"mean {self.mean_error:.2f} px, std {self.std_dev:.2f}, "
            f"keypoints {self.keypoint_count}"
        )


def _hartley_normalization(points: np.ndarray) -> np.ndarray:
    """Similarity transform moving the centroid to the origin and the mean
    distance from it to sqrt(2)."""
    centroid = points.mean(axis=0)
    dist = np.sqrt(((points - centroid) ** 2).sum(axis=1)).mean()
    if dist < 1e-15:
        raise DegenerateConfigurationError("all points coincide")
    s = math.sqrt(2.0) / dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def _dlt(image_pts: np.ndarray, world_pts: np.ndarray) -> Homography:
    t_img = _hartley_normalization(image_pts)
    t_wld = _hartley_normalization(world_pts)

    img_h = np.column_stack([image_pts, np.ones(len(image_pts))]) @ t_img.T
    wld_h = np.column_stack([world_pts, np.ones(len(world_pts))]) @ t_wld.T

    n = len(image_pts)
    a = np.zeros((2 * n, 9))
    for i in range(n):
        x, y = img_h[i, 0], img_h[i, 1]
        u, v = wld_h[i, 0], wld_h[i, 1]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]

    _, s, vt = np.linalg.svd(a)
    # A rank below 8 means the configuration does not pin down 8 DOF.
    if s[7] / s[0] < 1e-10:
        raise DegenerateConfigurationError(
            "degenerate keypoint configuration (collinear or coincident points)"
        )
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_wld) @ h_norm @ t_img
    return Homography(h)


def estimate_homography(
    corrs: Sequence[Correspondence], reject_outliers: bool = False
) -> Homography:
    """Least-squares homography image -> world via the normalized DLT.

    Both point sets are Hartley-normalized, the stacked linear system is
    solved by its smallest singular vector, and the result is denormalized
    and canonicalized.  All keypoints participate; they are hand-curated,
    so there is no sample consensus step by default.

    With ``reject_outliers`` the fit is repeated while dropping keypoints
    whose pixel reprojection error exceeds three times the median error,
    keeping at least four; useful when a calibration list has picked up a
    gross mistake.
    """
    if len(corrs) < 4:
        raise DegenerateConfigurationError(
            f"need at least 4 correspondences, got {len(corrs)}"
        )
    image_pts = np.array([[c.image.x, c.image.y] for c in corrs], dtype=float)
    world_pts = np.array([[c.world.lat, c.world.lon] for c in corrs], dtype=float)

    h = _dlt(image_pts, world_pts)
    if not reject_outliers:
        return h

    keep = np.ones(len(corrs), dtype=bool)
    for _ in range(5):
        errors = np.array(
            [
                _pixel_error(h, corrs[i])
                for i in range(len(corrs))
            ]
        )
        median = np.median(errors[keep])
        new_keep = keep & (errors <= max(3.0 * median, 1e-9))
        if new_keep.sum() < 4 or np.array_equal(new_keep, keep):
            break
        keep = new_keep
        h = _dlt(image_pts[keep], world_pts[keep])
    return h


def apply_homography(h: Homography, p: PixelPoint) -> GeoPoint:
    """Project an image point to world coordinates: divide ``H (x, y, 1)`` by
    its scale factor."""
    vec = h.matrix @ np.array([p.x, p.y, 1.0])
    w = vec[2]
    if abs(w) < W_TOLERANCE:
        raise ProjectionError(f"pixel ({p.x}, {p.y}) maps to infinity (w={w:g})")
    lat, lon = vec[0] / w, vec[1] / w
    try:
        return GeoPoint(lat, lon)
    except ValueError as exc:
        raise ProjectionError(
            f"pixel ({p.x}, {p.y}) maps outside the valid geographic range: {exc}"
        ) from exc


def project_world_to_image(h: Homography, g: GeoPoint) -> PixelPoint:
    """Project a world point into the image with the matrix inverse of ``h``."""
    vec = np.linalg.inv(h.matrix) @ np.array([g.lat, g.lon, 1.0])
    w = vec[2]
    if abs(w) < W_TOLERANCE:
        raise ProjectionError(f"({g.lat}, {g.lon}) maps to infinity (w={w:g})")
    return PixelPoint(vec[0] / w, vec[1] / w)


def _pixel_error(h: Homography, corr: Correspondence) -> float:
    projected = project_world_to_image(h, corr.world)
    return math.hypot(projected.x - corr.image.x, projected.y - corr.image.y)


def reprojection_report(
    h: Homography, corrs: Sequence[Correspondence]
) -> ReprojectionReport:
    """Per-keypoint pixel errors of projecting each world point back into the
    image, aggregated as max/min/mean/population standard deviation.

    Keypoints whose world position cannot be projected are excluded from the
    statistics and counted in ``failed_count``.
    """
    if not corrs:
        raise ValueError("no correspondences to evaluate")
    errors = []
    failed = 0
    for corr in corrs:
        try:
            errors.append(_pixel_error(h, corr))
        except ProjectionError:
            failed += 1
    if not errors:
        raise ProjectionError("every keypoint failed to project")
    arr = np.array(errors)
    return ReprojectionReport(
        max_error=float(arr.max()),
        min_error=float(arr.min()),
        mean_error=float(arr.mean()),
        std_dev=float(arr.std()),
        keypoint_count=len(errors),
        failed_count=failed,
    )
