"""Calibration and inspection HTTP service behind the operator UI.

The service holds one camera profile as an in-memory session: keypoint
edits and fits stay in the session until an explicit save.  Ground-truth
decisions are append-only (with timestamps) so the manual verification
trail stays auditable.  All timestamps are ISO-8601 UTC on the wire.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from . import ais as ais_mod
from .association import accuracy_percent, filter_candidates, nn_assign, project_candidates
from .dataset_io import (
    CameraProfile,
    CameraType,
    DatasetManifest,
    ManifestImage,
    import_detections,
    profile_to_dict,
    save_camera_profile,
)
from .frames import Raster, localize_in_panorama
from .geodesy import GeoPoint
from .projective import (
    Correspondence,
    DegenerateConfigurationError,
    PixelPoint,
    ProjectionError,
    apply_homography,
    estimate_homography,
    project_world_to_image,
    reprojection_report,
)

__all__ = ["CalibrationSession", "create_app", "serve_calibration"]


def _iso(timestamp_ms: int) -> str:
    return (
        datetime.fromtimestamp(timestamp_ms / 1000.0, tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )


def _now_iso() -> str:
    return datetime.now(tz=timezone.utc).isoformat().replace("+00:00", "Z")


class CalibrationSession:
    """Mutable service state: one profile, optional frame/AIS context, and
    the decision log.  Mutations are serialized; reads are lock-free."""

    def __init__(
        self,
        profile: CameraProfile,
        profile_path: str | Path | None = None,
        manifest: DatasetManifest | None = None,
        manifest_dir: str | Path | None = None,
        tracks: Mapping[int, ais_mod.VesselTrack] | None = None,
        detections_dir: str | Path | None = None,
        detections_format: str = "yolo-normalized",
        ground_truth_path: str | Path | None = None,
        localization: str = "pyramid",
    ) -> None:
        self.profile = profile
        self.profile_path = Path(profile_path) if profile_path else None
        self.manifest = manifest
        self.manifest_dir = Path(manifest_dir) if manifest_dir else None
        self.tracks = dict(tracks or {})
        self.detections_dir = Path(detections_dir) if detections_dir else None
        self.detections_format = detections_format
        self.ground_truth_path = Path(ground_truth_path) if ground_truth_path else None
        self.localization = localization
        self.decisions: list[dict] = []
        self.lock = threading.Lock()
        self._fitted = None
        if self.ground_truth_path and self.ground_truth_path.exists():
            for line in self.ground_truth_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self.decisions.append(json.loads(line))

    # -- frames ---------------------------------------------------------

    def frame_entry(self, image_id: int) -> ManifestImage:
        for image in self.manifest.images if self.manifest else []:
            if image.id == image_id:
                return image
        raise KeyError(image_id)

    def frame_path(self, image: ManifestImage) -> Path:
        path = Path(image.path)
        if not path.is_absolute() and self.manifest_dir:
            path = self.manifest_dir / path
        return path

    # -- calibration ----------------------------------------------------

    def current_homography(self):
        if self._fitted is not None:
            return self._fitted
        return self.profile.homography()

    def fit(self):
        if len(self.profile.keypoints) < 4:
            raise DegenerateConfigurationError(
                f"{len(self.profile.keypoints)} keypoints enabled, need at least 4"
            )
        h = estimate_homography(self.profile.keypoints)
        report = reprojection_report(h, self.profile.keypoints)
        self._fitted = h
        return h, report

    # -- ground truth ---------------------------------------------------

    def record_decision(self, entry: dict) -> None:
        self.decisions.append(entry)
        if self.ground_truth_path:
            with open(self.ground_truth_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def running_accuracy(self) -> tuple[int, int, float | None]:
        latest: dict[tuple, dict] = {}
        for entry in self.decisions:
            key = (entry["image_id"], tuple(entry["bbox"]))
            latest[key] = entry
        total = len(latest)
        correct = sum(1 for e in latest.values() if e.get("decision") == "confirm")
        return correct, total, accuracy_percent(correct, total)


class KeypointBody(BaseModel):
    image: tuple[float, float]
    world: tuple[float, float]


class KeypointListBody(BaseModel):
    keypoints: list[KeypointBody]


class DecisionBody(BaseModel):
    bbox: tuple[float, float, float, float]
    proposed_vessel_id: int | None = None
    decision: str  # confirm | reject | reassign
    vessel_id: int | None = None


def _report_json(report) -> dict:
    return {
        "max_error": report.max_error,
        "min_error": report.min_error,
        "mean_error": report.mean_error,
        "std_dev": report.std_dev,
        "keypoint_count": report.keypoint_count,
        "failed_count": report.failed_count,
    }


def create_app(session: CalibrationSession) -> FastAPI:
    app = FastAPI(title="aisfusion calibration service")

    @app.get("/profile")
    def get_profile() -> JSONResponse:
        return JSONResponse(profile_to_dict(session.profile))

    @app.put("/profile/keypoints")
    def put_keypoints(body: KeypointListBody) -> dict:
        with session.lock:
            session.profile.replace_keypoints(
                [
                    Correspondence(
                        image=PixelPoint(kp.image[0], kp.image[1]),
                        world=GeoPoint(kp.world[0], kp.world[1]),
                    )
                    for kp in body.keypoints
                ]
            )
            session._fitted = None
        return {"count": len(body.keypoints)}

    @app.post("/profile/save")
    def save_profile() -> dict:
        if session.profile_path is None:
            raise HTTPException(status_code=422, detail="service started without a profile path")
        with session.lock:
            if session._fitted is not None:
                session.profile._homography = session._fitted
            save_camera_profile(session.profile, session.profile_path)
        return {"saved": str(session.profile_path)}

    @app.post("/fit")
    def fit() -> dict:
        with session.lock:
            try:
                h, report = session.fit()
            except DegenerateConfigurationError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        return {"homography": h.matrix.tolist(), "report": _report_json(report)}

    @app.get("/project")
    def project(lat: float, lon: float) -> dict:
        try:
            point = project_world_to_image(session.current_homography(), GeoPoint(lat, lon))
        except (ProjectionError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"x": point.x, "y": point.y}

    @app.get("/unproject")
    def unproject(x: float, y: float) -> dict:
        try:
            point = apply_homography(session.current_homography(), PixelPoint(x, y))
        except (ProjectionError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"lat": point.lat, "lon": point.lon}

    @app.get("/frames")
    def frames() -> list[dict]:
        if session.manifest is None:
            return []
        return [
            {
                "id": im.id,
                "path": im.path,
                "camera": im.camera,
                "timestamp": _iso(im.timestamp_ms),
            }
            for im in session.manifest.images
        ]

    @app.get("/frame/{image_id}")
    def frame(image_id: int) -> FileResponse:
        try:
            entry = session.frame_entry(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown frame {image_id}")
        path = session.frame_path(entry)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"frame file missing: {path}")
        return FileResponse(path)

    @app.get("/frame/{image_id}/associations")
    def frame_associations(
        image_id: int, window: float = 30.0, mode: str = "one-to-one"
    ) -> dict:
        try:
            entry = session.frame_entry(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown frame {image_id}")
        profile = session.profile
        try:
            h = session.current_homography()
        except Exception as exc:
            raise HTTPException(status_code=422, detail=f"no homography: {exc}")

        candidates = (
            filter_candidates(session.tracks, profile.roi, entry.timestamp_ms, window)
            if profile.roi is not None
            else [
                fix
                for vid in sorted(session.tracks)
                if (
                    fix := ais_mod.interpolate_position(
                        session.tracks[vid], entry.timestamp_ms, window
                    )
                )
                is not None
            ]
        )
        offset = None
        if profile.camera_type in (CameraType.PANNING, CameraType.DUAL):
            pano_path = Path(profile.panorama_path or "")
            if not pano_path.is_absolute() and session.profile_path:
                pano_path = session.profile_path.parent / pano_path
            try:
                offset = localize_in_panorama(
                    Raster.from_file(session.frame_path(entry)),
                    Raster.from_file(pano_path),
                    method=session.localization,
                )
            except Exception as exc:
                raise HTTPException(status_code=422, detail=f"localization failed: {exc}")

        projected = project_candidates(candidates, h, offset, profile.resolution)
        detections = []
        if session.detections_dir is not None:
            det_path = session.detections_dir / (Path(entry.path).stem + ".txt")
            if det_path.exists():
                detections = import_detections(
                    det_path, session.detections_format, profile.resolution, image_id
                ).detections

        usable = (
            [c for c in projected.candidates if c.in_frame]
            if mode == "one-to-one"
            else list(projected.candidates)
        )
        result = nn_assign(
            [d.center for d in detections],
            [(c.vessel_id, c.point) for c in usable],
            mode=mode,
        )
        return {
            "image_id": image_id,
            "timestamp": _iso(entry.timestamp_ms),
            "candidates": [
                {
                    "vessel_id": c.vessel_id,
                    "x": c.point.x,
                    "y": c.point.y,
                    "in_frame": c.in_frame,
                    "source": c.fix.source.value,
                }
                for c in projected.candidates
            ],
            "detections": [
                {"bbox": list(d.bbox), "center": [d.center.x, d.center.y]}
                for d in detections
            ],
            "assignments": [
                {
                    "box_index": a.box_index,
                    "vessel_id": a.vessel_id,
                    "distance": a.distance,
                }
                for a in result.assignments
            ],
            "unmatched_detections": result.unmatched_boxes,
            "unmatched_vessels": [usable[i].vessel_id for i in result.unmatched_points],
        }

    @app.post("/groundtruth/{image_id}")
    def post_ground_truth(image_id: int, body: DecisionBody) -> dict:
        if body.decision not in ("confirm", "reject", "reassign"):
            raise HTTPException(status_code=422, detail=f"unknown decision {body.decision!r}")
        if body.decision == "reassign" and body.vessel_id is None:
            raise HTTPException(status_code=422, detail="reassign needs vessel_id")
        entry = {
            "image_id": image_id,
            "bbox": list(body.bbox),
            "proposed_vessel_id": body.proposed_vessel_id,
            "decision": body.decision,
            "vessel_id": body.vessel_id
            if body.decision == "reassign"
            else body.proposed_vessel_id,
            "timestamp": _now_iso(),
        }
        with session.lock:
            session.record_decision(entry)
            correct, total, accuracy = session.running_accuracy()
        return {"recorded": True, "correct": correct, "total": total, "accuracy": accuracy}

    @app.get("/accuracy")
    def get_accuracy() -> dict:
        correct, total, accuracy = session.running_accuracy()
        return {"correct": correct, "total": total, "accuracy": accuracy}

    return app


def serve_calibration(session: CalibrationSession, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the calibration service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(session), host=host, port=port, log_level="info")
