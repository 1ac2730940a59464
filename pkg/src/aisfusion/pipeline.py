"""End-to-end run orchestration: frames in, AIS-enriched annotations out.

Each frame goes through duplicate screening, (for dual cameras) view
classification, panorama localization when panning, AIS candidate
filtering, projection, and bbox assignment; the per-frame outputs are
merged deterministically and exported as an annotation document plus an
association results file that can be scored against ground truth later.
"""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import ais as ais_mod
from .association import (
    AssociationResult,
    Detection,
    ImageAssociations,
    compute_accuracy,
    filter_candidates,
    nn_assign,
    project_candidates,
)
from .dataset_io import (
    CameraProfile,
    CameraType,
    DatasetManifest,
    ManifestImage,
    export_annotations,
    import_detections,
    load_camera_profile,
    write_annotations,
)
from .frames import (
    DEFAULT_DUPLICATE_THRESHOLD,
    DUPLICATE_RING_SIZE,
    FrameClass,
    Raster,
    classify_frame,
    compute_histogram,
    is_duplicate,
    localize_in_panorama,
)

__all__ = [
    "PipelineConfig",
    "RunSummary",
    "run_pipeline",
    "load_ground_truth",
    "results_document",
    "results_to_image_associations",
    "load_tracks",
]

log = logging.getLogger(__name__)

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class PipelineConfig:
    """Run inputs and knobs; all referenced paths must exist at startup."""

    profile: str
    detections_dir: str
    manifest: str | None = None
    images_dir: str | None = None
    ais_nmea: list[str] = field(default_factory=list)
    ais_tabular: list[str] = field(default_factory=list)
    detections_format: str = "yolo-normalized"
    window_s: float = 30.0
    mode: str = "one-to-one"
    max_dist: float = 150.0
    dedup: bool = True
    duplicate_threshold: float = DEFAULT_DUPLICATE_THRESHOLD
    localization: str = "pyramid"
    workers: int = 1
    output_annotations: str | None = None
    output_results: str | None = None
    ground_truth: str | None = None

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if self.manifest is None and self.images_dir is None:
            raise ValueError("either manifest or images_dir is required")
        for path in [
            self.profile,
            self.manifest,
            self.images_dir,
            self.detections_dir,
            self.ground_truth,
            *self.ais_nmea,
            *self.ais_tabular,
        ]:
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(path)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PipelineConfig":
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class RunSummary:
    """Accounting for one pipeline run; processed and skipped counts add up
    to the number of input frames."""

    frames_total: int = 0
    processed: int = 0
    skipped_duplicate: int = 0
    skipped_empty: int = 0
    skipped_transition: int = 0
    skipped_error: int = 0
    associations_made: int = 0
    accuracy: float | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def display(self) -> str:
        acc = "n/a" if self.accuracy is None else f"{self.accuracy:.2f} %"
        lines = [
            f"frames        {self.frames_total}",
            f"processed     {self.processed}",
            f"dup skipped   {self.skipped_duplicate}",
            f"empty skipped {self.skipped_empty}",
            f"transition    {self.skipped_transition}",
            f"errors        {self.skipped_error}",
            f"associations  {self.associations_made}",
            f"accuracy      {acc}",
        ]
        for stage, seconds in self.timings.items():
            lines.append(f"t[{stage}]  {seconds:.3f} s")
        return "\n".join(lines)


def load_tracks(
    nmea_paths: Sequence[str | Path] = (),
    tabular_paths: Sequence[str | Path] = (),
) -> ais_mod.TrackSet:
    """Decode and merge all AIS sources into per-vessel tracks."""
    records: list[ais_mod.AisRecord] = []
    for path in nmea_paths:
        records.extend(ais_mod.decode_file(path).records)
    for path in tabular_paths:
        records.extend(ais_mod.load_tabular(path).records)
    return ais_mod.build_tracks(records)


def _enumerate_frames(cfg: PipelineConfig) -> list[ManifestImage]:
    if cfg.manifest:
        manifest = DatasetManifest.load(cfg.manifest)
        images = sorted(manifest.images, key=lambda im: (im.timestamp_ms, im.id))
        base = Path(cfg.manifest).parent
        return [
            ManifestImage(
                im.id,
                str((base / im.path) if not Path(im.path).is_absolute() else im.path),
                im.camera,
                im.timestamp_ms,
            )
            for im in images
        ]
    entries = []
    for path in sorted(Path(cfg.images_dir or ".").iterdir()):
        if path.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        try:
            stamp = ais_mod.epoch_ms(float(path.stem))
        except ValueError:
            log.warning("cannot parse timestamp from %s, skipping", path.name)
            continue
        entries.append((stamp, path))
    entries.sort()
    return [
        ManifestImage(idx, str(path), "", stamp)
        for idx, (stamp, path) in enumerate(entries)
    ]


def _detections_path(cfg: PipelineConfig, image: ManifestImage) -> Path:
    return Path(cfg.detections_dir) / (Path(image.path).stem + ".txt")


@dataclass
class _FrameWork:
    image: ManifestImage
    raster: Raster
    camera: str
    fixed_route: bool


class _Timer:
    def __init__(self) -> None:
        self.totals: dict[str, float] = {}

    def add(self, stage: str, start: float) -> None:
        self.totals[stage] = self.totals.get(stage, 0.0) + (time.perf_counter() - start)


def run_pipeline(cfg: PipelineConfig) -> RunSummary:
    """Run the full fusion pipeline for one camera.

    Per-frame failures (unreadable image, localization trouble) are counted
    and skipped; only setup problems abort the run.
    """
    summary = RunSummary()
    timer = _Timer()

    t0 = time.perf_counter()
    profile = load_camera_profile(cfg.profile)
    tracks = load_tracks(cfg.ais_nmea, cfg.ais_tabular)
    frames = _enumerate_frames(cfg)
    summary.frames_total = len(frames)

    pano = None
    if profile.camera_type in (CameraType.PANNING, CameraType.DUAL):
        pano_path = Path(profile.panorama_path or "")
        if not pano_path.is_absolute():
            pano_path = Path(cfg.profile).parent / pano_path
        pano = Raster.from_file(pano_path)
    timer.add("setup", t0)

    # Duplicate screening and routing are inherently sequential (the ring
    # holds the accepted history); the heavy per-frame work is not.
    work: list[_FrameWork] = []
    ring: deque = deque(maxlen=DUPLICATE_RING_SIZE)
    t0 = time.perf_counter()
    for image in frames:
        try:
            raster = Raster.from_file(image.path, timestamp_ms=image.timestamp_ms)
        except Exception as exc:
            log.warning("unreadable frame %s: %s", image.path, exc)
            summary.skipped_error += 1
            continue
        hist = compute_histogram(raster)
        if cfg.dedup and is_duplicate(hist, ring, cfg.duplicate_threshold):
            summary.skipped_duplicate += 1
            continue
        ring.append(hist)

        camera = image.camera or profile.name
        fixed_route = profile.camera_type == CameraType.FIXED
        if profile.camera_type == CameraType.DUAL:
            if not profile.reference_histograms:
                log.warning("dual profile without reference histograms, skipping frame")
                summary.skipped_error += 1
                continue
            cls = classify_frame(hist, profile.reference_histograms)
            if cls == FrameClass.TRANSITION:
                summary.skipped_transition += 1
                continue
            fixed_route = cls == FrameClass.FIXED
            if fixed_route:
                camera = f"{camera}-F"
        work.append(_FrameWork(image, raster, camera, fixed_route))
    timer.add("screening", t0)

    def process(item: _FrameWork) -> ImageAssociations | None:
        image = item.image
        det_path = _detections_path(cfg, image)
        detections = (
            import_detections(
                det_path, cfg.detections_format, profile.resolution, image.id
            ).detections
            if det_path.exists()
            else []
        )
        candidates = (
            filter_candidates(tracks, profile.roi, image.timestamp_ms, cfg.window_s)
            if profile.roi is not None
            else [
                fix
                for vid in sorted(tracks)
                if (fix := ais_mod.interpolate_position(tracks[vid], image.timestamp_ms, cfg.window_s))
                is not None
            ]
        )
        if not detections and not candidates:
            return None

        if item.fixed_route:
            h = profile.fixed_homography() if profile.camera_type == CameraType.DUAL else profile.homography()
            offset = None
        else:
            h = profile.homography()
            offset = (
                localize_in_panorama(item.raster, pano, method=cfg.localization)
                if pano is not None
                else None
            )
        projected = project_candidates(
            candidates, h, offset, profile.resolution
        )
        if cfg.mode == "one-to-one":
            usable = [c for c in projected.candidates if c.in_frame]
        else:
            usable = list(projected.candidates)
        result = nn_assign(
            [d.center for d in detections],
            [(c.vessel_id, c.point) for c in usable],
            mode=cfg.mode,
            max_dist=cfg.max_dist,
        )
        return ImageAssociations(image.id, item.camera, detections, usable, result)

    t0 = time.perf_counter()
    outputs: list[ImageAssociations | None | Exception] = []
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(process, item) for item in work]
            for future in futures:
                try:
                    outputs.append(future.result())
                except Exception as exc:  # per-frame failure, never aborts
                    outputs.append(exc)
    else:
        for item in work:
            try:
                outputs.append(process(item))
            except Exception as exc:
                outputs.append(exc)
    timer.add("associate", t0)

    images: list[ImageAssociations] = []
    for item, outcome in zip(work, outputs):
        if isinstance(outcome, Exception):
            log.warning("frame %s failed: %s", item.image.path, outcome)
            summary.skipped_error += 1
        elif outcome is None:
            summary.skipped_empty += 1
        else:
            images.append(outcome)
    images.sort(key=lambda im: im.image_id)
    summary.processed = len(images)
    summary.associations_made = sum(len(im.result.assignments) for im in images)

    t0 = time.perf_counter()
    if cfg.output_annotations:
        write_annotations(export_annotations(images), cfg.output_annotations)
    if cfg.output_results:
        Path(cfg.output_results).write_text(
            json.dumps(results_document(images), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    if cfg.ground_truth:
        report = compute_accuracy(images, load_ground_truth(cfg.ground_truth))
        summary.accuracy = report.total.accuracy
    timer.add("export", t0)

    summary.timings = timer.totals
    return summary


def results_document(images: Sequence[ImageAssociations]) -> dict:
    """Associations in a plain re-loadable form (input to ``eval``)."""
    return {
        "version": 1,
        "images": [
            {
                "image_id": im.image_id,
                "camera": im.camera,
                "detections": [list(d.bbox) for d in im.detections],
                "assignments": [
                    {
                        "box_index": a.box_index,
                        "bbox": list(im.detections[a.box_index].bbox),
                        "vessel_id": a.vessel_id,
                        "distance": a.distance,
                    }
                    for a in im.result.assignments
                ],
                "unmatched_detections": [
                    list(im.detections[i].bbox) for i in im.result.unmatched_boxes
                ],
                "unmatched_vessels": [
                    im.candidates[i].vessel_id for i in im.result.unmatched_points
                ],
            }
            for im in sorted(images, key=lambda im: im.image_id)
        ],
    }


def results_to_image_associations(doc: Mapping) -> list[ImageAssociations]:
    """Rebuild scoreable associations from a results document."""
    from .projective import PixelPoint

    images = []
    for entry in doc.get("images", []):
        detections = [
            Detection(entry["image_id"], tuple(b)) for b in entry.get("detections", [])
        ]
        assignments = []
        for a in entry.get("assignments", []):
            det = detections[a["box_index"]]
            from .association import Assignment

            assignments.append(
                Assignment(a["box_index"], a["vessel_id"], det.center, a["distance"])
            )
        matched = {a.box_index for a in assignments}
        result = AssociationResult(
            assignments,
            [i for i in range(len(detections)) if i not in matched],
            [],
        )
        images.append(
            ImageAssociations(entry["image_id"], entry.get("camera", ""), detections, [], result)
        )
    return images


def load_ground_truth(path: str | Path) -> dict:
    """Read verified bbox->vessel ground truth.

    Accepts either a JSON list of {image_id, bbox, vessel_id} or the
    calibration service's append-only decision log (JSON lines); for the
    log, the latest decision per (image, bbox) wins, and rejected pairs are
    treated as having no known vessel.
    """
    text = Path(path).read_text(encoding="utf-8").strip()
    truth: dict[tuple[int, tuple[float, float, float, float]], int] = {}
    if not text:
        return truth
    if text.lstrip().startswith("["):
        for entry in json.loads(text):
            truth[(int(entry["image_id"]), tuple(float(v) for v in entry["bbox"]))] = int(
                entry["vessel_id"]
            )
        return truth
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        entry = json.loads(line)
        key = (int(entry["image_id"]), tuple(float(v) for v in entry["bbox"]))
        decision = entry.get("decision", "confirm")
        if decision == "reject":
            truth.pop(key, None)
        elif decision == "reassign":
            truth[key] = int(entry["vessel_id"])
        else:
            truth[key] = int(entry.get("vessel_id", entry.get("proposed_vessel_id")))
    return truth
