"""aisfusion: fuse AIS vessel data with camera detections.

Camera frames are georeferenced through keypoint-calibrated homographies
(with panorama localization for panning cameras), AIS messages are decoded
and interpolated onto frame timestamps, and the projected vessel positions
are matched to detected bounding boxes to produce enriched annotation
datasets and association-accuracy reports.
"""

from .geodesy import (
    AzimuthCalibration,
    AzimuthDistance,
    GeodesicConvergenceError,
    GeoPoint,
    forward_geodesic,
    interp_pixel_to_world,
    inverse_geodesic,
)
from .projective import (
    Correspondence,
    DegenerateConfigurationError,
    Homography,
    PixelPoint,
    ProjectionError,
    ReprojectionReport,
    apply_homography,
    estimate_homography,
    project_world_to_image,
    reprojection_report,
)
from .ais import (
    AisRecord,
    FixSource,
    InterpolatedFix,
    RawSentence,
    VesselTrack,
    build_tracks,
    decode_file,
    decode_sentences,
    interpolate_position,
    load_tabular,
)
from .frames import (
    FrameClass,
    Histogram,
    PanoramaOffset,
    Raster,
    classify_frame,
    compute_histogram,
    histogram_distance,
    is_duplicate,
    localize_in_panorama,
    query_to_panorama,
)
from .association import (
    AccuracyReport,
    Assignment,
    AssociationResult,
    Detection,
    ImageAssociations,
    RoiPolygon,
    accuracy_percent,
    compute_accuracy,
    filter_candidates,
    nn_assign,
    point_in_roi,
    project_candidates,
)
from .dataset_io import (
    AnnotationRecord,
    CameraProfile,
    CameraType,
    DatasetManifest,
    SequentialAnonymizer,
    VesselInfo,
    export_annotations,
    import_detections,
    load_camera_profile,
    parse_annotations,
    save_camera_profile,
    write_annotations,
)
from .pipeline import PipelineConfig, RunSummary, run_pipeline

__version__ = "0.1.0"
