"""Command-line entry points.

Subcommands mirror the pipeline stages: ``run`` executes a full fusion run,
``calibrate`` serves the HTTP calibration service, ``fit`` fits and reports
a profile's homography, ``eval`` scores existing results against ground
truth, and ``decode-ais`` turns raw NMEA logs into tabular fixes.  The
exit code is nonzero only when the command itself fails, never for
individual skipped frames or lines.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import ais as ais_mod
from .association import compute_accuracy
from .dataset_io import DatasetManifest, load_camera_profile, save_camera_profile
from .pipeline import (
    PipelineConfig,
    load_ground_truth,
    load_tracks,
    results_to_image_associations,
    run_pipeline,
)
from .projective import reprojection_report


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--profile", help="camera profile JSON")
    parser.add_argument("--manifest", help="dataset manifest JSON")
    parser.add_argument("--images-dir", help="directory of frames named <epoch>.<ext>")
    parser.add_argument("--detections-dir", help="directory of per-frame detection files")
    parser.add_argument(
        "--detections-format",
        choices=["yolo-normalized", "pixel-list"],
        help="detection file flavor",
    )
    parser.add_argument("--ais-nmea", action="append", default=None, help="NMEA log (repeatable)")
    parser.add_argument("--ais-tabular", action="append", default=None, help="tabular AIS (repeatable)")
    parser.add_argument("--window", type=float, help="AIS time window, seconds each side")
    parser.add_argument("--mode", choices=["one-to-one", "paper-sequential"], help="assignment mode")
    parser.add_argument("--max-dist", type=float, help="one-to-one distance gate, pixels")
    parser.add_argument("--dup-threshold", type=float, help="duplicate histogram distance threshold")
    parser.add_argument("--no-dedup", action="store_true", help="disable duplicate screening")
    parser.add_argument(
        "--localization", choices=["pyramid", "exhaustive"], help="panorama search mode"
    )
    parser.add_argument("--workers", type=int, help="parallel frame workers")
    parser.add_argument("--out-annotations", help="annotation document output path")
    parser.add_argument("--out-results", help="association results output path")
    parser.add_argument("--ground-truth", help="ground truth file for accuracy")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    doc: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    overrides = {
        "profile": args.profile,
        "manifest": args.manifest,
        "images_dir": args.images_dir,
        "detections_dir": args.detections_dir,
        "detections_format": args.detections_format,
        "ais_nmea": args.ais_nmea,
        "ais_tabular": args.ais_tabular,
        "window_s": args.window,
        "mode": args.mode,
        "max_dist": args.max_dist,
        "duplicate_threshold": args.dup_threshold,
        "localization": args.localization,
        "workers": args.workers,
        "output_annotations": args.out_annotations,
        "output_results": args.out_results,
        "ground_truth": args.ground_truth,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_dedup:
        doc["dedup"] = False
    return PipelineConfig.from_dict(doc)


def _cmd_run(args: argparse.Namespace) -> int:
    summary = run_pipeline(_config_from_args(args))
    print(summary.display())
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    from .service import CalibrationSession, serve_calibration

    profile = load_camera_profile(args.profile)
    manifest = DatasetManifest.load(args.manifest) if args.manifest else None
    tracks = load_tracks(args.ais_nmea or [], args.ais_tabular or [])
    session = CalibrationSession(
        profile,
        profile_path=args.profile,
        manifest=manifest,
        manifest_dir=Path(args.manifest).parent if args.manifest else None,
        tracks=tracks,
        detections_dir=args.detections_dir,
        detections_format=args.detections_format or "yolo-normalized",
        ground_truth_path=args.ground_truth,
        localization=args.localization or "pyramid",
    )
    serve_calibration(session, host=args.host, port=args.port)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    profile = load_camera_profile(args.profile)
    h = profile.homography()
    report = reprojection_report(h, profile.keypoints)
    print("homography (image -> world, canonical):")
    for row in h.matrix:
        print("  " + "  ".join(f"{v: .9e}" for v in row))
    print(report.as_row())
    if args.save:
        save_camera_profile(profile, args.profile)
        print(f"profile updated: {args.profile}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.results).read_text(encoding="utf-8"))
    images = results_to_image_associations(doc)
    report = compute_accuracy(images, load_ground_truth(args.ground_truth))
    print(report.display())
    return 0


def _cmd_decode_ais(args: argparse.Namespace) -> int:
    result = ais_mod.decode_file(args.input, default_timestamp_ms=args.default_timestamp)
    stats = result.stats
    if args.out:
        import csv

        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["vessel_id", "timestamp", "latitude", "longitude", "speed",
                 "course", "heading", "type", "length", "width"]
            )
            for r in result.records:
                writer.writerow(
                    [
                        r.vessel_id,
                        r.timestamp_ms,
                        r.position.lat,
                        r.position.lon,
                        "" if r.sog is None else r.sog,
                        "" if r.cog is None else r.cog,
                        "" if r.heading is None else r.heading,
                        "" if r.ship_type is None else r.ship_type,
                        "" if r.length is None else r.length,
                        "" if r.width is None else r.width,
                    ]
                )
        print(f"wrote {len(result.records)} records to {args.out}")
    print(
        f"lines {stats.lines_total}, records {stats.records_emitted}, "
        f"static {stats.static_reports}, checksum failures {stats.checksum_failures}, "
        f"malformed {stats.malformed}, unsupported {stats.unsupported_type}, "
        f"no position {stats.missing_position}, no timestamp {stats.missing_timestamp}, "
        f"orphan fragments {stats.orphan_fragments}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aisfusion",
        description="Fuse AIS vessel data with camera detections via georeferenced homographies.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the fusion pipeline")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cal = sub.add_parser("calibrate", help="serve the calibration UI backend")
    p_cal.add_argument("--profile", required=True)
    p_cal.add_argument("--manifest")
    p_cal.add_argument("--detections-dir")
    p_cal.add_argument("--detections-format", choices=["yolo-normalized", "pixel-list"])
    p_cal.add_argument("--ais-nmea", action="append")
    p_cal.add_argument("--ais-tabular", action="append")
    p_cal.add_argument("--ground-truth", help="append-only decision log (JSON lines)")
    p_cal.add_argument("--localization", choices=["pyramid", "exhaustive"])
    p_cal.add_argument("--host", default="127.0.0.1")
    p_cal.add_argument("--port", type=int, default=8000)
    p_cal.set_defaults(func=_cmd_calibrate)

    p_fit = sub.add_parser("fit", help="fit a profile's homography and report errors")
    p_fit.add_argument("--profile", required=True)
    p_fit.add_argument("--save", action="store_true", help="cache the fit into the profile")
    p_fit.set_defaults(func=_cmd_fit)

    p_eval = sub.add_parser("eval", help="score association results against ground truth")
    p_eval.add_argument("--results", required=True)
    p_eval.add_argument("--ground-truth", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_dec = sub.add_parser("decode-ais", help="decode an NMEA log into tabular fixes")
    p_dec.add_argument("--input", required=True)
    p_dec.add_argument("--out", help="CSV output path")
    p_dec.add_argument(
        "--default-timestamp",
        type=int,
        help="epoch ms for lines without a timestamp prefix",
    )
    p_dec.set_defaults(func=_cmd_decode_ais)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
