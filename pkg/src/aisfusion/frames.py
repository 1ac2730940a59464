"""Frame preprocessing: histograms, duplicate screening, view classification,
and query-in-panorama localization.

Histograms are 256 bins per channel, L1-normalized per channel, compared by
Euclidean distance.  Localization uses zero-mean normalized cross-correlation
(window means subtracted, window norms divided out) so the score is robust to
the illumination swings of outdoor webcams; the peak over all valid
placements gives the query's offset inside the panorama.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import oaconvolve

__all__ = [
    "Raster",
    "Histogram",
    "FrameClass",
    "PanoramaOffset",
    "FlatQueryError",
    "compute_histogram",
    "histogram_distance",
    "is_duplicate",
    "classify_frame",
    "localize_in_panorama",
    "query_to_panorama",
    "to_grayscale",
]

DUPLICATE_RING_SIZE = 20

# Default duplicate threshold on L2 distance between L1-normalized histograms,
# calibrated on synthetic repeat-vs-motion frame pairs (see demos/).
DEFAULT_DUPLICATE_THRESHOLD = 0.02


class FlatQueryError(ValueError):
    """Zero-variance query image: its correlation is undefined everywhere."""


class FrameClass(Enum):
    """Appearance classes for cameras that alternate between behaviors."""

    PANNING = "panning"
    FIXED = "fixed"
    TRANSITION = "transition"


@dataclass(frozen=True)
class Raster:
    """An 8-bit image with capture metadata.

    ``data`` is (height, width) for single-channel or (height, width, 3)
    for color, dtype uint8.
    """

    data: np.ndarray
    timestamp_ms: int | None = None
    camera_id: str | None = None

    def __post_init__(self) -> None:
        d = self.data
        if d.dtype != np.uint8:
            raise ValueError(f"raster must be uint8, got {d.dtype}")
        if d.ndim == 2:
            pass
        elif d.ndim == 3 and d.shape[2] in (1, 3):
            if d.shape[2] == 1:
                object.__setattr__(self, "data", d[:, :, 0])
        else:
            raise ValueError(f"unsupported raster shape {d.shape}")
        if d.shape[0] <= 0 or d.shape[1] <= 0:
            raise ValueError(f"zero-area raster {d.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    @classmethod
    def from_file(
        cls,
        path: str | Path,
        timestamp_ms: int | None = None,
        camera_id: str | None = None,
    ) -> "Raster":
        """Load any 8-bit image file Pillow understands; decoded pixels are
        the contract, so lossy formats are fine."""
        from PIL import Image

        with Image.open(path) as img:
            if img.mode != "L":
                img = img.convert("RGB")
            data = np.asarray(img, dtype=np.uint8)
        return cls(data=data, timestamp_ms=timestamp_ms, camera_id=camera_id)


def to_grayscale(img: Raster | np.ndarray) -> np.ndarray:
    """Luma conversion (0.299/0.587/0.114), rounding half-up, uint8 out."""
    data = img.data if isinstance(img, Raster) else np.asarray(img)
    if data.ndim == 2:
        return data.astype(np.uint8, copy=False)
    if data.shape[2] == 1:
        return data[:, :, 0].astype(np.uint8, copy=False)
    weights = np.array([0.299, 0.587, 0.114])
    return np.floor(data @ weights + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class Histogram:
    """Concatenated per-channel 256-bin histograms, each channel summing to 1."""

    values: np.ndarray
    channels: int

    def __post_init__(self) -> None:
        expected = 256 * self.channels
        if self.values.shape != (expected,):
            raise ValueError(
                f"expected {expected} bins for {self.channels} channels, "
                f"got shape {self.values.shape}"
            )


def compute_histogram(img: Raster) -> Histogram:
    """Per-channel 256-bin counts, L1-normalized per channel."""
    data = img.data
    npix = img.width * img.height
    if npix == 0:
        raise ValueError("zero-area raster")
    if data.ndim == 2:
        planes = [data]
    else:
        planes = [data[:, :, c] for c in range(data.shape[2])]
    parts = [
        np.bincount(p.ravel(), minlength=256).astype(float) / npix for p in planes
    ]
    return Histogram(np.concatenate(parts), channels=len(planes))


def histogram_distance(a: Histogram, b: Histogram) -> float:
    """Euclidean distance over the concatenated bins."""
    if a.values.shape != b.values.shape:
        raise ValueError(
            f"histogram dimensionality mismatch: {a.values.shape} vs {b.values.shape}"
        )
    return float(np.linalg.norm(a.values - b.values))


def is_duplicate(
    img: Raster | Histogram,
    ring: Sequence[Histogram],
    threshold: float = DEFAULT_DUPLICATE_THRESHOLD,
) -> bool:
    """True iff the frame's histogram lies strictly within ``threshold`` of any
    of the (up to 20) previously accepted frames' histograms."""
    if not ring:
        return False
    hist = img if isinstance(img, Histogram) else compute_histogram(img)
    return any(histogram_distance(hist, other) < threshold for other in ring)


def classify_frame(
    img: Raster | Histogram, references: Mapping[FrameClass, Sequence[Histogram]]
) -> FrameClass:
    """Assign the class of the globally nearest reference histogram.

    Ties go to the earliest class in :class:`FrameClass` declaration order,
    then to the earliest reference within it, so results do not depend on
    mapping iteration order.
    """
    for cls in FrameClass:
        if not references.get(cls):
            raise ValueError(f"no reference histograms for class {cls.value}")
    hist = img if isinstance(img, Histogram) else compute_histogram(img)
    best: tuple[float, FrameClass] | None = None
    for cls in FrameClass:
        for ref in references[cls]:
            d = histogram_distance(hist, ref)
            if best is None or d < best[0]:
                best = (d, cls)
    assert best is not None
    return best[1]


@dataclass(frozen=True)
class PanoramaOffset:
    """Top-left placement of a query image inside its panorama."""

    dx: int
    dy: int
    score: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.score <= 1.0:
            raise ValueError(f"correlation score {self.score} outside [-1, 1]")


def _window_sums(img: np.ndarray, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window sums of pixels and squared pixels via integral images.

    float64 accumulation is exact here: 8-bit frames and their factor-2
    block means are small dyadic rationals whose running sums stay far
    below 2**53.
    """
    pix = img.astype(float)
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    ii2 = np.zeros_like(ii)
    np.cumsum(np.cumsum(pix, axis=0), axis=1, out=ii[1:, 1:])
    np.cumsum(np.cumsum(pix * pix, axis=0), axis=1, out=ii2[1:, 1:])

    def window(table: np.ndarray) -> np.ndarray:
        return (
            table[h:, w:]
            - table[:-h, w:]
            - table[h:, :-w]
            + table[:-h, :-w]
        )

    return window(ii), window(ii2)


def _ncc_surface(pano: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Zero-mean NCC of ``query`` against every valid placement in ``pano``."""
    h, w = query.shape
    t0 = query.astype(float) - query.astype(float).mean()
    t_norm_sq = float((t0 * t0).sum())
    if t_norm_sq <= 0.0:
        raise FlatQueryError("query image has zero variance")

    num = oaconvolve(pano.astype(float), t0[::-1, ::-1], mode="valid")
    win_sum, win_sum_sq = _window_sums(pano, h, w)
    n = float(h * w)
    win_var = win_sum_sq - win_sum * win_sum / n
    np.maximum(win_var, 0.0, out=win_var)

    denom = np.sqrt(win_var * t_norm_sq)
    scores = np.zeros_like(num)
    np.divide(num, denom, out=scores, where=denom > 0.0)
    np.clip(scores, -1.0, 1.0, out=scores)
    return scores


def _ncc_at(
    pano: np.ndarray,
    t0: np.ndarray,
    t_norm_sq: float,
    win_sum: np.ndarray,
    win_sum_sq: np.ndarray,
    dy: int,
    dx: int,
) -> float:
    """Exact zero-mean NCC for one placement (same arithmetic as the surface)."""
    h, w = t0.shape
    window = pano[dy : dy + h, dx : dx + w].astype(float)
    num = float((window * t0).sum())
    n = float(h * w)
    var = max(win_sum_sq[dy, dx] - win_sum[dy, dx] ** 2 / n, 0.0)
    denom = math.sqrt(var * t_norm_sq)
    if denom <= 0.0:
        return 0.0
    return max(-1.0, min(1.0, num / denom))


def _downsample(img: np.ndarray) -> np.ndarray:
    """2x2 block mean, trimming an odd last row/column."""
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    trimmed = img[:h, :w].astype(float)
    return (
        trimmed[0::2, 0::2] + trimmed[1::2, 0::2] + trimmed[0::2, 1::2] + trimmed[1::2, 1::2]
    ) / 4.0


def _argmax_lex(surface: np.ndarray) -> tuple[int, int]:
    # C-order argmax = first maximum = smallest (dy, dx) lexicographically.
    flat = int(np.argmax(surface))
    dy, dx = divmod(flat, surface.shape[1])
    return dy, dx


def localize_in_panorama(
    query: Raster | np.ndarray,
    pano: Raster | np.ndarray,
    method: str = "exhaustive",
    min_coarse_size: int = 24,
) -> PanoramaOffset:
    """Find where a query frame sits inside a panorama.

    ``exhaustive`` evaluates zero-mean NCC at every valid placement and is
    the reference mode.  ``pyramid`` matches on a factor-2 image pyramid and
    refines within a +/-2 px band per level: much faster on large panoramas
    and checked against the exhaustive mode for equality in the test suite.
    Ties are broken toward the smallest (dy, dx).
    """
    def as_gray(x: Raster | np.ndarray) -> np.ndarray:
        if isinstance(x, Raster):
            return to_grayscale(x)
        arr = np.asarray(x)
        return to_grayscale(arr) if arr.ndim == 3 else arr

    q = as_gray(query)
    p = as_gray(pano)
    if q.shape[0] > p.shape[0] or q.shape[1] > p.shape[1]:
        raise ValueError(
            f"query {q.shape} larger than panorama {p.shape}"
        )
    if float(q.std()) == 0.0:
        raise FlatQueryError("query image has zero variance")

    if method == "exhaustive":
        surface = _ncc_surface(p, q)
        dy, dx = _argmax_lex(surface)
        return PanoramaOffset(dx=dx, dy=dy, score=float(surface[dy, dx]))
    if method != "pyramid":
        raise ValueError(f"unknown method {method!r}")

    # Build the pyramid: level 0 is full resolution.
    levels = [(p, q)]
    while min(levels[-1][1].shape) >= 2 * min_coarse_size and min(levels[-1][0].shape) > 2:
        levels.append((_downsample(levels[-1][0]), _downsample(levels[-1][1])))

    coarse_p, coarse_q = levels[-1]
    dy, dx = _argmax_lex(_ncc_surface(coarse_p, coarse_q))

    for level_p, level_q in reversed(levels[:-1]):
        dy, dx = 2 * dy, 2 * dx
        h, w = level_q.shape
        t0 = level_q.astype(float) - level_q.astype(float).mean()
        t_norm_sq = float((t0 * t0).sum())
        win_sum, win_sum_sq = _window_sums(level_p, h, w)
        max_dy = level_p.shape[0] - h
        max_dx = level_p.shape[1] - w
        best = None
        for cy in range(max(0, dy - 2), min(max_dy, dy + 2) + 1):
            for cx in range(max(0, dx - 2), min(max_dx, dx + 2) + 1):
                score = _ncc_at(level_p, t0, t_norm_sq, win_sum, win_sum_sq, cy, cx)
                if best is None or score > best[0]:
                    best = (score, cy, cx)
        assert best is not None
        _, dy, dx = best

    # Score at the final placement via the same arithmetic as exhaustive mode.
    t0 = q.astype(float) - q.astype(float).mean()
    t_norm_sq = float((t0 * t0).sum())
    win_sum, win_sum_sq = _window_sums(p, q.shape[0], q.shape[1])
    score = _ncc_at(p, t0, t_norm_sq, win_sum, win_sum_sq, dy, dx)
    return PanoramaOffset(dx=dx, dy=dy, score=score)


def query_to_panorama(p, off: PanoramaOffset):
    """Shift query-image coordinates into panorama coordinates."""
    from .projective import PixelPoint

    return PixelPoint(p.x + off.dx, p.y + off.dy)
