"""Candidate filtering, projection into the image, bbox<->vessel assignment,
and accuracy scoring against ground truth.

For each frame, AIS tracks are filtered to a camera's world-coordinate
region of interest and a +/-30 s window around the frame timestamp, the
surviving positions are projected into pixel coordinates, and the projected
points are matched to detected bounding-box centers with a k-d tree.  Two
assignment policies exist: ``paper-sequential`` assigns every projected
point to its nearest center in input order (many-to-one allowed), while the
default ``one-to-one`` takes globally closest pairs first, each side used
at most once, rejecting pairs beyond a pixel-distance gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .ais import InterpolatedFix, VesselTrack, interpolate_position
from .geodesy import GeoPoint
from .projective import Homography, PixelPoint, ProjectionError, project_world_to_image
from .frames import PanoramaOffset

__all__ = [
    "Detection",
    "RoiPolygon",
    "Assignment",
    "AssociationResult",
    "ImageAssociations",
    "CameraAccuracy",
    "AccuracyReport",
    "point_in_roi",
    "filter_candidates",
    "ProjectedCandidate",
    "ProjectionOutcome",
    "project_candidates",
    "nn_assign",
    "accuracy_percent",
    "compute_accuracy",
]


@dataclass(frozen=True)
class Detection:
    """A detected vessel bounding box, top-left origin, pixel units."""

    image_id: int
    bbox: tuple[float, float, float, float]
    clamped: bool = False

    def __post_init__(self) -> None:
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError(f"bbox {self.bbox} has non-positive extent")

    @property
    def center(self) -> PixelPoint:
        x, y, w, h = self.bbox
        return PixelPoint(x + w / 2.0, y + h / 2.0)


def _segments_properly_intersect(a, b, c, d) -> bool:
    def orient(p, q, r) -> float:
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    return False


@dataclass(frozen=True)
class RoiPolygon:
    """A simple polygon of world coordinates, implicitly closed."""

    vertices: tuple[GeoPoint, ...]

    def __post_init__(self) -> None:
        distinct = {(v.lat, v.lon) for v in self.vertices}
        if len(distinct) < 3:
            raise ValueError("polygon needs at least 3 distinct vertices")
        pts = [(v.lon, v.lat) for v in self.vertices]
        n = len(pts)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue  # adjacent edges share an endpoint
                if _segments_properly_intersect(
                    pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]
                ):
                    raise ValueError("polygon is self-intersecting")


def _on_segment(px, py, x1, y1, x2, y2, eps=1e-12) -> bool:
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    scale = max(abs(x2 - x1), abs(y2 - y1), 1.0)
    if abs(cross) > eps * scale:
        return False
    dot = (px - x1) * (x2 - x1) + (py - y1) * (y2 - y1)
    return -eps <= dot <= (x2 - x1) ** 2 + (y2 - y1) ** 2 + eps


def point_in_roi(p: GeoPoint, roi: RoiPolygon) -> bool:
    """Ray-casting parity test in the (lon, lat) plane; boundary points count
    as inside."""
    px, py = p.lon, p.lat
    pts = [(v.lon, v.lat) for v in roi.vertices]
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if _on_segment(px, py, x1, y1, x2, y2):
            return True
    inside = False
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            x_cross = x1 + (py - y1) / (y2 - y1) * (x2 - x1)
            if px < x_cross:
                inside = not inside
    return inside


def filter_candidates(
    tracks: Mapping[int, VesselTrack],
    roi: RoiPolygon,
    t_ms: int,
    window_s: float = 30.0,
) -> list[InterpolatedFix]:
    """Vessels with an in-window fix whose at-timestamp position lies inside
    the region of interest, ordered by vessel id."""
    out: list[InterpolatedFix] = []
    for vessel_id in sorted(tracks):
        fix = interpolate_position(tracks[vessel_id], t_ms, window_s)
        if fix is not None and point_in_roi(fix.position, roi):
            out.append(fix)
    return out


@dataclass(frozen=True)
class ProjectedCandidate:
    vessel_id: int
    point: PixelPoint
    in_frame: bool
    fix: InterpolatedFix


@dataclass(frozen=True)
class ProjectionOutcome:
    candidates: list[ProjectedCandidate]
    dropped: int


def project_candidates(
    cands: Sequence[InterpolatedFix],
    h: Homography,
    offset: PanoramaOffset | None,
    image_size: tuple[int, int],
) -> ProjectionOutcome:
    """Project world-space candidates into query-image pixels.

    ``h`` calibrates the camera frame directly for fixed cameras; for
    panning cameras it calibrates the panorama and ``offset`` (the query's
    localization) shifts panorama pixels into the query image.  Candidates
    that project to infinity are dropped and counted.
    """
    width, height = image_size
    out: list[ProjectedCandidate] = []
    dropped = 0
    for fix in cands:
        try:
            pt = project_world_to_image(h, fix.position)
        except ProjectionError:
            dropped += 1
            continue
        if offset is not None:
            pt = PixelPoint(pt.x - offset.dx, pt.y - offset.dy)
        in_frame = 0.0 <= pt.x < width and 0.0 <= pt.y < height
        out.append(ProjectedCandidate(fix.vessel_id, pt, in_frame, fix))
    return ProjectionOutcome(out, dropped)


@dataclass(frozen=True)
class Assignment:
    box_index: int
    vessel_id: int
    point: PixelPoint
    distance: float


@dataclass(frozen=True)
class AssociationResult:
    """Assignments plus the leftovers on both sides (indices into the inputs)."""

    assignments: list[Assignment]
    unmatched_boxes: list[int]
    unmatched_points: list[int]


def _nearest_box(tree: cKDTree, centers: np.ndarray, p: PixelPoint) -> tuple[int, float]:
    dist, idx = tree.query([p.x, p.y])
    # Exact-tie determinism: among equidistant centers pick the lowest index.
    ties = tree.query_ball_point([p.x, p.y], r=dist)
    if len(ties) > 1:
        exact = [i for i in ties if math.hypot(centers[i, 0] - p.x, centers[i, 1] - p.y) == dist]
        if exact:
            idx = min(exact)
    return int(idx), float(dist)


def nn_assign(
    boxes: Sequence[PixelPoint],
    points: Sequence[tuple[int, PixelPoint]],
    mode: str = "one-to-one",
    max_dist: float = 150.0,
) -> AssociationResult:
    """Match projected vessel points to bounding-box centers.

    ``paper-sequential``: each point is assigned to its nearest center in
    input order; several points may share a center and no distance gate
    applies.  ``one-to-one``: globally closest pairs first, each box and
    each point used at most once, pairs farther than ``max_dist`` pixels
    left unmatched.
    """
    if mode not in ("one-to-one", "paper-sequential"):
        raise ValueError(f"unknown assignment mode {mode!r}")
    if not boxes or not points:
        return AssociationResult([], list(range(len(boxes))), list(range(len(points))))

    centers = np.array([[b.x, b.y] for b in boxes])
    tree = cKDTree(centers)

    if mode == "paper-sequential":
        assignments = []
        used_boxes: set[int] = set()
        for vessel_id, p in points:
            idx, dist = _nearest_box(tree, centers, p)
            assignments.append(Assignment(idx, vessel_id, p, dist))
            used_boxes.add(idx)
        unmatched_boxes = [i for i in range(len(boxes)) if i not in used_boxes]
        return AssociationResult(assignments, unmatched_boxes, [])

    # one-to-one: greedy over all pairs ordered by (distance, box, point).
    pairs = []
    for bi, b in enumerate(boxes):
        for pi, (_, p) in enumerate(points):
            d = math.hypot(b.x - p.x, b.y - p.y)
            if d <= max_dist:
                pairs.append((d, bi, pi))
    pairs.sort()

    taken_boxes: set[int] = set()
    taken_points: set[int] = set()
    assignments = []
    for d, bi, pi in pairs:
        if bi in taken_boxes or pi in taken_points:
            continue
        vessel_id, p = points[pi]
        assignments.append(Assignment(bi, vessel_id, p, d))
        taken_boxes.add(bi)
        taken_points.add(pi)
    assignments.sort(key=lambda a: a.box_index)
    return AssociationResult(
        assignments,
        [i for i in range(len(boxes)) if i not in taken_boxes],
        [i for i in range(len(points)) if i not in taken_points],
    )


@dataclass(frozen=True)
class ImageAssociations:
    """One frame's association output, ready for scoring and export.

    ``candidates`` holds the projected vessels in the order their points
    were fed to :func:`nn_assign`, so ``result`` indices resolve to them.
    """

    image_id: int
    camera: str
    detections: list[Detection]
    candidates: list[ProjectedCandidate]
    result: AssociationResult


def accuracy_percent(correct: int, total_pairs: int) -> float | None:
    """The fraction of correct associations as a percentage; ``None`` (not 0
    or 100) when there are no pairs to judge."""
    if total_pairs == 0:
        return None
    return 100.0 * correct / total_pairs


@dataclass(frozen=True)
class CameraAccuracy:
    correct: int
    total_pairs: int

    @property
    def accuracy(self) -> float | None:
        return accuracy_percent(self.correct, self.total_pairs)

    def display(self) -> str:
        acc = self.accuracy
        acc_str = "n/a" if acc is None else f"{acc:.2f}"
        return f"{acc_str} % ({self.correct}/{self.total_pairs})"


@dataclass(frozen=True)
class AccuracyReport:
    """Correct/total association counts per camera plus the overall row."""

    per_camera: dict[str, CameraAccuracy]
    total: CameraAccuracy

    def display(self) -> str:
        lines = [
            f"{name:<16} {acc.display()}" for name, acc in sorted(self.per_camera.items())
        ]
        lines.append(f"{'Total':<16} {self.total.display()}")
        return "\n".join(lines)


GroundTruth = Mapping[tuple[int, tuple[float, float, float, float]], int]


def compute_accuracy(
    images: Iterable[ImageAssociations], ground_truth: GroundTruth
) -> AccuracyReport:
    """Score assignments against verified bbox->vessel ground truth.

    Every assignment counts as a pair; it is correct when the ground truth
    for its (image, bbox) names the same vessel.  Assignments without a
    ground-truth entry count as incorrect (they could not be verified).
    """
    per_camera: dict[str, list[int]] = {}
    for image in images:
        bucket = per_camera.setdefault(image.camera, [0, 0])
        for a in image.result.assignments:
            detection = image.detections[a.box_index]
            bucket[1] += 1
            truth = ground_truth.get((image.image_id, detection.bbox))
            if truth is not None and truth == a.vessel_id:
                bucket[0] += 1
    cameras = {
        name: CameraAccuracy(correct, total)
        for name, (correct, total) in per_camera.items()
    }
    total = CameraAccuracy(
        sum(c.correct for c in cameras.values()),
        sum(c.total_pairs for c in cameras.values()),
    )
    return AccuracyReport(cameras, total)
