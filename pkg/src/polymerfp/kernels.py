"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is picked once at import from the ``POLYMERFP_BACKEND``
environment variable: ``numba`` (default when numba is importable) or
``numpy``.  Both paths compute the same quantities; the numba path keeps
a fixed row-major summation order per output element, the numpy path
delegates the reductions to BLAS.  See ``benchmarks/bench_kernels.py``
for a timing comparison.
"""

from __future__ import annotations

import math
import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_ENV = "POLYMERFP_BACKEND"


def _pick_backend() -> str:
    choice = os.environ.get(BACKEND_ENV, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        import numba  # noqa: F401  -- fail loudly if the requested backend is absent

        return "numba"
    if choice:
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {choice!r}")
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def _correlate_core(img, kre, kim, rows, cols, out_re, out_im):
    # out[i,j] = sum_{p,q} img[rows[i]-h+p, cols[j]-h+q] * kflip[p,q]
    # where kflip is the flipped conjugate kernel, split into re/im planes.
    size = kre.shape[0]
    half = (size - 1) // 2
    for gi in range(rows.shape[0]):
        r0 = rows[gi] - half
        for gj in range(cols.shape[0]):
            c0 = cols[gj] - half
            acc_re = 0.0
            acc_im = 0.0
            for p in range(size):
                for q in range(size):
                    v = img[r0 + p, c0 + q]
                    acc_re += v * kre[p, q]
                    acc_im += v * kim[p, q]
            out_re[gi, gj] = acc_re
            out_im[gi, gj] = acc_im


def _rotate_core(img, cos_a, sin_a, fill, out):
    # Inverse-map each output pixel, bilinear blend, fill outside the frame.
    height, width = img.shape
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    for r in range(height):
        dy = r - cy
        for c in range(width):
            dx = c - cx
            sx = cos_a * dx + sin_a * dy + cx
            sy = -sin_a * dx + cos_a * dy + cy
            x0 = int(math.floor(sx))
            y0 = int(math.floor(sy))
            fx = sx - x0
            fy = sy - y0
            v00 = img[y0, x0] if 0 <= y0 < height and 0 <= x0 < width else fill
            v01 = img[y0, x0 + 1] if 0 <= y0 < height and 0 <= x0 + 1 < width else fill
            v10 = img[y0 + 1, x0] if 0 <= y0 + 1 < height and 0 <= x0 < width else fill
            v11 = (
                img[y0 + 1, x0 + 1]
                if 0 <= y0 + 1 < height and 0 <= x0 + 1 < width
                else fill
            )
            top = v00 * (1.0 - fx) + v01 * fx
            bot = v10 * (1.0 - fx) + v11 * fx
            out[r, c] = top * (1.0 - fy) + bot * fy


def _correlate_numpy(img, kre, kim, rows, cols):
    size = kre.shape[0]
    half = (size - 1) // 2
    windows = sliding_window_view(img, (size, size))
    block = windows[np.ix_(rows - half, cols - half)]
    out_re = np.tensordot(block, kre, axes=([2, 3], [0, 1]))
    out_im = np.tensordot(block, kim, axes=([2, 3], [0, 1]))
    return out_re, out_im


def _rotate_numpy(img, cos_a, sin_a, fill):
    height, width = img.shape
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    cgrid, rgrid = np.meshgrid(np.arange(width) - cx, np.arange(height) - cy)
    sx = cos_a * cgrid + sin_a * rgrid + cx
    sy = -sin_a * cgrid + cos_a * rgrid + cy
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    def sample(yy, xx):
        inside = (yy >= 0) & (yy < height) & (xx >= 0) & (xx < width)
        vals = img[np.clip(yy, 0, height - 1), np.clip(xx, 0, width - 1)]
        return np.where(inside, vals, fill)

    top = sample(y0, x0) * (1.0 - fx) + sample(y0, x0 + 1) * fx
    bot = sample(y0 + 1, x0) * (1.0 - fx) + sample(y0 + 1, x0 + 1) * fx
    return top * (1.0 - fy) + bot * fy


_BACKEND = _pick_backend()

if _BACKEND == "numba":
    from numba import njit

    _correlate_jit = njit(cache=True)(_correlate_core)
    _rotate_jit = njit(cache=True)(_rotate_core)


def active_backend() -> str:
    return _BACKEND


def correlate_at_points(img: np.ndarray, kernel: np.ndarray, rows, cols) -> np.ndarray:
    """Correlate ``img`` with the conjugate kernel at the given grid points.

    Returns the complex matrix ``out[i, j] = sum_{a,b} img[a, b] *
    conj(kernel[rows[i]-a+h, cols[j]-b+h])`` for a square kernel of
    half-width ``h``; every requested window must lie inside the image.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    kernel = np.asarray(kernel)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {kernel.shape}")
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    half = (kernel.shape[0] - 1) // 2
    if (
        rows.min() < half
        or cols.min() < half
        or rows.max() >= img.shape[0] - half
        or cols.max() >= img.shape[1] - half
    ):
        raise ValueError("kernel window exits the image at a requested grid point")
    kflip = np.conj(kernel)[::-1, ::-1]
    kre = np.ascontiguousarray(kflip.real, dtype=np.float64)
    kim = np.ascontiguousarray(kflip.imag, dtype=np.float64)
    if _BACKEND == "numba":
        out_re = np.empty((rows.size, cols.size), dtype=np.float64)
        out_im = np.empty_like(out_re)
        _correlate_jit(img, kre, kim, rows, cols, out_re, out_im)
    else:
        out_re, out_im = _correlate_numpy(img, kre, kim, rows, cols)
    return out_re + 1j * out_im


def rotate_bilinear(img: np.ndarray, angle_deg: float, fill: float = 1.0) -> np.ndarray:
    """Rotate image content by ``angle_deg`` about the image centre.

    Positive angles turn the content clockwise in image coordinates
    (x right, y down).  Samples falling outside the frame take ``fill``.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    a = math.radians(angle_deg)
    cos_a = math.cos(a)
    sin_a = math.sin(a)
    if _BACKEND == "numba":
        out = np.empty_like(img)
        _rotate_jit(img, cos_a, sin_a, float(fill), out)
        return out
    return _rotate_numpy(img, cos_a, sin_a, float(fill))
