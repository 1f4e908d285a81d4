"""Grayscale note images: PGM I/O, fiducial markers, alignment, cropping.

Images are 2-D float64 arrays with intensities in [0, 1]; element
``img[y, x]`` is row y, column x.  Marker coordinates are ``(x, y)``
pairs in the same frame (x right, y down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Tuple

import numpy as np
from scipy import ndimage

from . import kernels
from .gabor import FEATURE_SIZE

#: Intensity below which a pixel counts as marker material.
DEFAULT_MARKER_THRESHOLD = 0.08

#: Connected dark regions smaller than this are ignored by the detector.
MIN_MARKER_AREA = 9

MAX_ROTATION_DEG = 15.0

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class PgmError(ValueError):
    pass


class MarkerDetectionError(ValueError):
    pass


class MarkerPair(NamedTuple):
    m1: Tuple[float, float]
    m2: Tuple[float, float]


@dataclass(frozen=True)
class NoteLayout:
    """Fixed geometry tying the fiducial markers to the feature area.

    ``feature_offset`` is the (x, y) displacement from the upper marker
    centre to the feature-area origin; it is identical at enrollment and
    verification.
    """

    marker1: Tuple[int, int] = (60, 165)
    marker2: Tuple[int, int] = (60, 735)
    marker_half: int = 5
    feature_offset: Tuple[int, int] = (16, -75)
    feature_size: int = FEATURE_SIZE


DEFAULT_LAYOUT = NoteLayout()


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate and return a unit-interval grayscale image array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite intensities")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    return arr


# ---------------------------------------------------------------------------
# PGM (binary P5, 8-bit) reading and writing
# ---------------------------------------------------------------------------

def _next_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in b" \t\r\n":
            pos += 1
        elif c == ord("#"):
            nl = data.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise PgmError("malformed header: unexpected end of file")
    return data[start:pos], pos


def load_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM; intensities map 0 -> 0.0, 255 -> 1.0.

    Comment lines in the header are tolerated.  ASCII PGM ("P2") and
    other magics are rejected.
    """
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise PgmError(f"unsupported format: expected P5, got {magic!r}")
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise PgmError(f"malformed header: non-numeric field {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmError(f"malformed header: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval}, only 255")
    pos += 1  # single whitespace byte after the maxval token
    raster = data[pos : pos + width * height]
    if len(raster) < width * height:
        raise PgmError("truncated pixel data")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return pixels.astype(np.float64) / 255.0


def save_pgm(img: np.ndarray, path) -> None:
    """Write a binary 8-bit PGM, quantizing by round(v * 255)."""
    arr = check_image(img)
    height, width = arr.shape
    raster = np.rint(arr * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(raster.tobytes())


# ---------------------------------------------------------------------------
# Fiducial markers and rotation correction
# ---------------------------------------------------------------------------

def detect_markers(img: np.ndarray, threshold: float = DEFAULT_MARKER_THRESHOLD) -> MarkerPair:
    """Locate the two dark fiducial blobs and return sub-pixel centroids.

    A blob is a connected set (8-connectivity) of pixels strictly below
    the threshold with area >= 9.  Exactly two qualifying blobs must be
    present.  Centroids are intensity-weighted with weight (1 - I), so
    darker pixels count more; the pair is ordered left-to-right by x,
    ties broken top first.
    """
    arr = check_image(img)
    mask = arr < threshold
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if count == 0:
        raise MarkerDetectionError("marker detection failed: no dark blobs")
    flat_labels = labels.ravel()
    areas = np.bincount(flat_labels, minlength=count + 1)
    qualifying = [lab for lab in range(1, count + 1) if areas[lab] >= MIN_MARKER_AREA]
    if len(qualifying) != 2:
        raise MarkerDetectionError(
            f"marker detection failed: expected 2 blobs, found {len(qualifying)}"
        )
    weights = (1.0 - arr).ravel()
    ys, xs = np.indices(arr.shape)
    centroids = []
    for lab in qualifying:
        sel = flat_labels == lab
        w = weights[sel]
        total = w.sum()
        cx = float((w * xs.ravel()[sel]).sum() / total)
        cy = float((w * ys.ravel()[sel]).sum() / total)
        centroids.append((cx, cy))
    centroids.sort(key=lambda c: (c[0], c[1]))
    return MarkerPair(m1=centroids[0], m2=centroids[1])


def rotation_angle(markers: MarkerPair) -> float:
    """Signed orientation of the marker axis relative to vertical, degrees.

    Positive angles mean the content is rotated clockwise in image
    coordinates; ``rotate(img, -rotation_angle(...))`` re-aligns it.  The
    result is wrapped into (-90, 90] so it does not depend on which
    marker the detector listed first.
    """
    (x1, y1), (x2, y2) = markers.m1, markers.m2
    if y1 == y2:
        raise ValueError("vertical baseline required: markers share the same y")
    angle = math.degrees(math.atan2(x1 - x2, y2 - y1))
    if angle > 90.0:
        angle -= 180.0
    elif angle <= -90.0:
        angle += 180.0
    return angle


def rotate(img: np.ndarray, alpha: float) -> np.ndarray:
    """Bilinear rotation about the image centre; white fill outside.

    Positive ``alpha`` turns content clockwise in image coordinates.
    Only small corrections are supported (|alpha| <= 15 degrees).
    """
    arr = check_image(img)
    if abs(alpha) > MAX_ROTATION_DEG:
        raise ValueError(f"|alpha| must be <= {MAX_ROTATION_DEG} degrees, got {alpha}")
    if alpha == 0.0:
        return arr.copy()
    return np.clip(kernels.rotate_bilinear(arr, alpha, fill=1.0), 0.0, 1.0)


def align(img: np.ndarray, threshold: float = DEFAULT_MARKER_THRESHOLD) -> np.ndarray:
    """Undo the rotation measured from the fiducial markers."""
    angle = rotation_angle(detect_markers(img, threshold))
    return rotate(img, -angle)


def crop_feature_area(
    img: np.ndarray, markers: MarkerPair, layout: NoteLayout = DEFAULT_LAYOUT
) -> np.ndarray:
    """Cut the canonical feature square at a fixed offset from the markers.

    The crop anchors on the upper marker of the pair (smaller y), which
    is stable however the detector ordered a near-vertical pair.
    """
    arr = check_image(img)
    anchor = min((markers.m1, markers.m2), key=lambda c: c[1])
    ox = int(round(anchor[0] + layout.feature_offset[0]))
    oy = int(round(anchor[1] + layout.feature_offset[1]))
    size = layout.feature_size
    if ox < 0 or oy < 0 or ox + size > arr.shape[1] or oy + size > arr.shape[0]:
        raise ValueError(
            f"feature area out of bounds: origin ({ox}, {oy}), size {size}, "
            f"image {arr.shape[1]}x{arr.shape[0]}"
        )
    return arr[oy : oy + size, ox : ox + size].copy()
