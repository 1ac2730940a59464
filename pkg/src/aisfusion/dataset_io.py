"""Camera profiles, detection import, annotation export, dataset manifests.

Profiles are versioned, hand-editable JSON documents holding everything a
camera needs for georeferencing: location, keypoint correspondences, region
of interest, panorama reference, and optional cached calibration.  The
annotation output is a JSON document whose per-vessel block carries exactly
the fields type/latitude/longitude/heading/course/length/width/speed, with
latitude/longitude as strings; export is deterministic and byte-stable for
fixed inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .association import Detection, ImageAssociations, RoiPolygon
from .frames import FrameClass, Histogram
from .geodesy import GeoPoint
from .projective import Correspondence, Homography, PixelPoint, estimate_homography

__all__ = [
    "CameraType",
    "CameraProfile",
    "ProfileValidationError",
    "load_camera_profile",
    "save_camera_profile",
    "ImportResult",
    "import_detections",
    "VesselInfo",
    "AnnotationRecord",
    "SequentialAnonymizer",
    "export_annotations",
    "write_annotations",
    "parse_annotations",
    "ManifestImage",
    "DatasetManifest",
]

PROFILE_VERSION = 1
ANNOTATION_VERSION = 1
MANIFEST_VERSION = 1

VESSEL_CATEGORY = {"id": 1, "name": "Vessel"}


class ProfileValidationError(ValueError):
    """A camera profile document violates its own contract."""


class CameraType(Enum):
    FIXED = "fixed"
    PANNING = "panning"
    DUAL = "dual"


@dataclass
class CameraProfile:
    """Everything needed to georeference one webcam.

    ``keypoints`` calibrate the camera frame (fixed cameras) or the
    panorama (panning cameras).  Dual cameras additionally carry
    ``fixed_keypoints`` for their fixed view, since the two behaviors are
    calibrated separately.
    """

    name: str
    camera_type: CameraType
    resolution: tuple[int, int]
    location: GeoPoint
    direction: str = ""
    keypoints: list[Correspondence] = field(default_factory=list)
    fixed_keypoints: list[Correspondence] = field(default_factory=list)
    roi: RoiPolygon | None = None
    panorama_path: str | None = None
    reference_histograms: dict[FrameClass, list[Histogram]] | None = None
    _homography: Homography | None = field(default=None, repr=False)
    _fixed_homography: Homography | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.camera_type in (CameraType.PANNING, CameraType.DUAL) and not self.panorama_path:
            raise ProfileValidationError(
                f"{self.camera_type.value} profile {self.name!r} requires panorama_path"
            )

    def homography(self) -> Homography:
        """The image->world calibration, fitted lazily from the keypoints."""
        if self._homography is None:
            if len(self.keypoints) < 4:
                raise ProfileValidationError(
                    f"profile {self.name!r} has {len(self.keypoints)} keypoints, "
                    "need at least 4 to fit a homography"
                )
            self._homography = estimate_homography(self.keypoints)
        return self._homography

    def fixed_homography(self) -> Homography:
        """Calibration of a dual camera's fixed view."""
        if self.camera_type != CameraType.DUAL:
            return self.homography()
        if self._fixed_homography is None:
            if len(self.fixed_keypoints) < 4:
                raise ProfileValidationError(
                    f"dual profile {self.name!r} has {len(self.fixed_keypoints)} "
                    "fixed-view keypoints, need at least 4"
                )
            self._fixed_homography = estimate_homography(self.fixed_keypoints)
        return self._fixed_homography

    def replace_keypoints(self, keypoints: Sequence[Correspondence]) -> None:
        self.keypoints = list(keypoints)
        self._homography = None


def _corr_to_json(c: Correspondence) -> dict:
    return {"image": [c.image.x, c.image.y], "world": [c.world.lat, c.world.lon]}


def _corr_from_json(d: Mapping) -> Correspondence:
    return Correspondence(
        image=PixelPoint(float(d["image"][0]), float(d["image"][1])),
        world=GeoPoint(float(d["world"][0]), float(d["world"][1])),
    )


def profile_to_dict(profile: CameraProfile) -> dict:
    doc: dict = {
        "version": PROFILE_VERSION,
        "name": profile.name,
        "type": profile.camera_type.value,
        "resolution": list(profile.resolution),
        "location": {"lat": profile.location.lat, "lon": profile.location.lon},
        "direction": profile.direction,
        "keypoints": [_corr_to_json(c) for c in profile.keypoints],
    }
    if profile.fixed_keypoints:
        doc["fixed_keypoints"] = [_corr_to_json(c) for c in profile.fixed_keypoints]
    if profile.roi is not None:
        doc["roi"] = [[v.lat, v.lon] for v in profile.roi.vertices]
    if profile.panorama_path:
        doc["panorama_path"] = profile.panorama_path
    if profile._homography is not None:
        doc["homography"] = profile._homography.matrix.tolist()
    if profile.reference_histograms:
        channels = next(iter(profile.reference_histograms.values()))[0].channels
        doc["reference_histograms"] = {
            "channels": channels,
            **{
                cls.value: [h.values.tolist() for h in hists]
                for cls, hists in profile.reference_histograms.items()
            },
        }
    return doc


def profile_from_dict(doc: Mapping) -> CameraProfile:
    version = doc.get("version")
    if version != PROFILE_VERSION:
        raise ProfileValidationError(f"unsupported profile version {version!r}")
    try:
        camera_type = CameraType(doc["type"])
        profile = CameraProfile(
            name=doc["name"],
            camera_type=camera_type,
            resolution=(int(doc["resolution"][0]), int(doc["resolution"][1])),
            location=GeoPoint(float(doc["location"]["lat"]), float(doc["location"]["lon"])),
            direction=doc.get("direction", ""),
            keypoints=[_corr_from_json(c) for c in doc.get("keypoints", [])],
            fixed_keypoints=[_corr_from_json(c) for c in doc.get("fixed_keypoints", [])],
            roi=(
                RoiPolygon(tuple(GeoPoint(v[0], v[1]) for v in doc["roi"]))
                if doc.get("roi")
                else None
            ),
            panorama_path=doc.get("panorama_path"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ProfileValidationError):
            raise
        raise ProfileValidationError(f"malformed profile document: {exc}") from exc
    if doc.get("homography") is not None:
        profile._homography = Homography(np.array(doc["homography"]))
    refs = doc.get("reference_histograms")
    if refs:
        channels = int(refs.get("channels", 3))
        profile.reference_histograms = {
            cls: [
                Histogram(np.array(values, dtype=float), channels=channels)
                for values in refs.get(cls.value, [])
            ]
            for cls in FrameClass
            if refs.get(cls.value)
        }
    return profile


def load_camera_profile(path: str | Path) -> CameraProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


def save_camera_profile(profile: CameraProfile, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(profile_to_dict(profile), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


@dataclass
class ImportResult:
    detections: list[Detection]
    skipped_lines: int

    def __iter__(self) -> Iterator[Detection]:
        return iter(self.detections)


def import_detections(
    path: str | Path,
    fmt: str,
    image_size: tuple[int, int],
    image_id: int = 0,
) -> ImportResult:
    """Read one frame's detections.

    ``yolo-normalized``: lines ``class cx cy w h`` with center/size in
    [0, 1], converted to top-left pixel boxes.  ``pixel-list``: lines
    ``x y w h`` already in pixels.  Bad lines are skipped and counted;
    boxes poking past the image edge are clamped and flagged.
    """
    if fmt not in ("yolo-normalized", "pixel-list"):
        raise ValueError(f"unknown detection format {fmt!r}")
    width, height = image_size
    detections: list[Detection] = []
    skipped = 0
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        try:
            if fmt == "yolo-normalized":
                if len(parts) < 5:
                    raise ValueError("expected 'class cx cy w h'")
                cx, cy, w, h = (float(v) for v in parts[1:5])
                if not all(0.0 <= v <= 1.0 for v in (cx, cy, w, h)):
                    raise ValueError("normalized value outside [0, 1]")
                bbox = ((cx - w / 2.0) * width, (cy - h / 2.0) * height, w * width, h * height)
            else:
                if len(parts) < 4:
                    raise ValueError("expected 'x y w h'")
                bbox = tuple(float(v) for v in parts[:4])
            x, y, w, h = bbox
            cx0 = min(max(x, 0.0), width)
            cy0 = min(max(y, 0.0), height)
            cw = min(x + w, float(width)) - cx0
            ch = min(y + h, float(height)) - cy0
            clamped = (cx0, cy0, cw, ch) != (x, y, w, h)
            detections.append(
                Detection(image_id=image_id, bbox=(cx0, cy0, cw, ch), clamped=clamped)
            )
        except ValueError:
            skipped += 1
    return ImportResult(detections, skipped)


def _plain_number(value: float | int | None) -> float | int | None:
    """Render 29.0 as 29 the way hand-written annotation files do."""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


@dataclass(frozen=True)
class VesselInfo:
    """The per-vessel block of one annotation; field names are the schema."""

    type: int | None
    latitude: str
    longitude: str
    heading: float | None
    course: float | None
    length: float | None
    width: float | None
    speed: float | None

    def __post_init__(self) -> None:
        GeoPoint(float(self.latitude), float(self.longitude))  # must parse

    @property
    def position(self) -> GeoPoint:
        return GeoPoint(float(self.latitude), float(self.longitude))

    def to_json(self) -> dict:
        return {
            "type": self.type,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "heading": _plain_number(self.heading),
            "course": _plain_number(self.course),
            "length": _plain_number(self.length),
            "width": _plain_number(self.width),
            "speed": _plain_number(self.speed),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "VesselInfo":
        return cls(
            type=d.get("type"),
            latitude=str(d["latitude"]),
            longitude=str(d["longitude"]),
            heading=d.get("heading"),
            course=d.get("course"),
            length=d.get("length"),
            width=d.get("width"),
            speed=d.get("speed"),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: int
    bbox: tuple[float, float, float, float]
    category_id: int = VESSEL_CATEGORY["id"]
    unique_id: int | None = None
    vessel_info: VesselInfo | None = None

    def to_json(self) -> dict:
        doc: dict = {
            "image_id": self.image_id,
            "bbox": list(self.bbox),
            "category_id": self.category_id,
            "unique_id": self.unique_id,
        }
        if self.vessel_info is not None:
            doc["vessel_info"] = self.vessel_info.to_json()
        return doc

    @classmethod
    def from_json(cls, d: Mapping) -> "AnnotationRecord":
        info = d.get("vessel_info")
        return cls(
            image_id=int(d["image_id"]),
            bbox=tuple(float(v) for v in d["bbox"]),
            category_id=int(d.get("category_id", VESSEL_CATEGORY["id"])),
            unique_id=d.get("unique_id"),
            vessel_info=VesselInfo.from_json(info) if info else None,
        )


class SequentialAnonymizer:
    """Replace vessel identifiers with sequential integers, first seen first."""

    def __init__(self, start: int = 0) -> None:
        self._mapping: dict[int, int] = {}
        self._next = start

    def __call__(self, vessel_id: int) -> int:
        if vessel_id not in self._mapping:
            self._mapping[vessel_id] = self._next
            self._next += 1
        return self._mapping[vessel_id]

    @property
    def mapping(self) -> dict[int, int]:
        return dict(self._mapping)


def export_annotations(
    images: Sequence[ImageAssociations],
    anonymizer: Callable[[int], int] | None = None,
) -> dict:
    """Build the annotation document for a set of associated frames.

    One record per detection, sorted by (image_id, bbox): matched
    detections carry the associated vessel's data and its anonymized
    identifier, unmatched ones have no vessel block.  Output is a plain
    dict whose JSON serialization is byte-stable for fixed inputs.
    """
    if anonymizer is None:
        anonymizer = SequentialAnonymizer()

    entries: list[tuple[int, tuple, Detection, object]] = []
    for image in sorted(images, key=lambda im: im.image_id):
        matched = {a.box_index: a for a in image.result.assignments}
        fix_by_vessel = {c.vessel_id: c.fix for c in image.candidates}
        for idx, det in enumerate(image.detections):
            assignment = matched.get(idx)
            fix = fix_by_vessel.get(assignment.vessel_id) if assignment else None
            entries.append((image.image_id, det.bbox, det, (assignment, fix)))

    entries.sort(key=lambda e: (e[0], e[1]))
    annotations = []
    for image_id, bbox, det, (assignment, fix) in entries:
        if assignment is not None and fix is not None:
            info = VesselInfo(
                type=fix.ship_type,
                latitude=repr(fix.position.lat),
                longitude=repr(fix.position.lon),
                heading=fix.heading,
                course=fix.cog,
                length=fix.length,
                width=fix.width,
                speed=fix.sog,
            )
            record = AnnotationRecord(
                image_id=image_id,
                bbox=bbox,
                unique_id=anonymizer(assignment.vessel_id),
                vessel_info=info,
            )
        else:
            record = AnnotationRecord(image_id=image_id, bbox=bbox)
        annotations.append(record.to_json())

    return {
        "version": ANNOTATION_VERSION,
        "categories": [VESSEL_CATEGORY],
        "annotations": annotations,
    }


def write_annotations(doc: Mapping, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def parse_annotations(source: str | Path | Mapping) -> list[AnnotationRecord]:
    """Read an annotation document (path or already-parsed dict) back into
    records; inverse of :func:`export_annotations`."""
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        doc = source
    return [AnnotationRecord.from_json(a) for a in doc.get("annotations", [])]


@dataclass(frozen=True)
class ManifestImage:
    id: int
    path: str
    camera: str
    timestamp_ms: int


@dataclass
class DatasetManifest:
    """Index of a dataset run: images, annotation files, split tags."""

    images: list[ManifestImage] = field(default_factory=list)
    annotation_files: list[str] = field(default_factory=list)
    splits: dict[int, str] = field(default_factory=dict)

    def validate(self) -> None:
        ids = [im.id for im in self.images]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate image ids in manifest")
        unknown = set(self.splits) - set(ids)
        if unknown:
            raise ValueError(f"split tags reference unknown image ids {sorted(unknown)}")
        bad = {tag for tag in self.splits.values() if tag not in ("train", "val", "test")}
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")

    def validate_annotations(self, doc: Mapping) -> None:
        """Referential integrity: every annotation must point at a known image."""
        ids = {im.id for im in self.images}
        for record in doc.get("annotations", []):
            if record["image_id"] not in ids:
                raise ValueError(
                    f"annotation references unknown image_id {record['image_id']}"
                )

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "images": [
                {
                    "id": im.id,
                    "path": im.path,
                    "camera": im.camera,
                    "timestamp_ms": im.timestamp_ms,
                }
                for im in self.images
            ],
            "annotation_files": list(self.annotation_files),
            "splits": {str(k): v for k, v in self.splits.items()},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "DatasetManifest":
        manifest = cls(
            images=[
                ManifestImage(
                    id=int(im["id"]),
                    path=im["path"],
                    camera=im.get("camera", ""),
                    timestamp_ms=int(im["timestamp_ms"]),
                )
                for im in doc.get("images", [])
            ],
            annotation_files=list(doc.get("annotation_files", [])),
            splits={int(k): v for k, v in doc.get("splits", {}).items()},
        )
        manifest.validate()
        return manifest

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        self.validate()
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
