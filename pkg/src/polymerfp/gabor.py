"""2-D Gabor filtering of the feature area into a 2048-bit fingerprint.

A single complex Gabor kernel (picked by scale index ``u`` and
orientation index ``v`` out of a ``U`` x ``V`` filter bank) is correlated
with the 721x721 feature crop at a 32x32 grid of sample points, and each
complex response is quantized to two bits by the signs of its real and
imaginary parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Tuple

import numpy as np

from . import kernels
from .fingerprint import Fingerprint

SQRT2 = math.sqrt(2.0)

#: Response sample grid: positions ``GRID_ANCHOR + GRID_STRIDE*k`` (zero
#: based) along both axes, for ``k in range(GRID_SIZE)``.
GRID_ANCHOR = 50
GRID_STRIDE = 20
GRID_SIZE = 32

DEFAULT_KERNEL_SIZE = 101

#: Canonical feature-area edge length.  A kernel of half-width 50 centred
#: on the last grid position (50 + 20*31 = 670) reaches pixel 720, so a
#: 721-pixel crop is the smallest one that needs no boundary padding.
FEATURE_SIZE = GRID_ANCHOR + GRID_STRIDE * (GRID_SIZE - 1) + DEFAULT_KERNEL_SIZE // 2 + 1

GRID_POSITIONS = np.arange(GRID_SIZE, dtype=np.int64) * GRID_STRIDE + GRID_ANCHOR


@dataclass(frozen=True)
class GaborParams:
    """Filter-bank coordinates and envelope shape of one Gabor kernel.

    ``f_max`` is the top frequency of the bank in cycles/pixel, ``u`` of
    ``U`` selects the scale, ``v`` of ``V`` the orientation.  ``gamma``
    and ``eta`` are the smoothing factors along and across the wave.
    """

    f_max: float = 0.25
    gamma: float = SQRT2
    eta: float = SQRT2
    u: int = 5
    U: int = 6
    v: int = 11
    V: int = 30
    kernel_size: int = DEFAULT_KERNEL_SIZE

    def __post_init__(self):
        if self.f_max <= 0 or self.gamma <= 0 or self.eta <= 0:
            raise ValueError("f_max, gamma and eta must be positive")
        if not 1 <= self.u <= self.U:
            raise ValueError(f"scale index u={self.u} outside 1..{self.U}")
        if not 1 <= self.v <= self.V:
            raise ValueError(f"orientation index v={self.v} outside 1..{self.V}")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 3")


def scale_frequency(p: GaborParams) -> float:
    """Central frequency of scale ``u``: f_max / sqrt(2^(u-1))."""
    return p.f_max / math.sqrt(2.0 ** (p.u - 1))


def orientation_angle(p: GaborParams) -> float:
    """Wave orientation of index ``v``: ((v-1)/V) * pi, radians."""
    return (p.v - 1) / p.V * math.pi


def build_kernel(p: GaborParams) -> np.ndarray:
    """Complex Gabor kernel sampled at integer offsets from the origin.

    psi(x, y) = F^2/(pi*gamma*eta) * exp(-F^2 [(x'/gamma)^2 + (y'/eta)^2])
                * exp(i 2 pi F x')
    with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta).
    Axis 0 of the returned array runs along x.
    """
    freq = scale_frequency(p)
    theta = orientation_angle(p)
    half = (p.kernel_size - 1) // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    x = coords[:, None]
    y = coords[None, :]
    xp = x * math.cos(theta) + y * math.sin(theta)
    yp = -x * math.sin(theta) + y * math.cos(theta)
    envelope = np.exp(-(freq * freq) * ((xp / p.gamma) ** 2 + (yp / p.eta) ** 2))
    wave = np.exp(2j * math.pi * freq * xp)
    return (freq * freq / (math.pi * p.gamma * p.eta)) * envelope * wave


def response_grid(
    img: np.ndarray,
    kernel: np.ndarray,
    rows: Iterable[int] | None = None,
    cols: Iterable[int] | None = None,
) -> np.ndarray:
    """Correlation of the image with the conjugate kernel at grid points.

    Defaults to the canonical 32x32 grid; pass explicit ``rows``/``cols``
    to evaluate a sub-grid (used on smaller test images).
    """
    rows = GRID_POSITIONS if rows is None else np.asarray(rows, dtype=np.int64)
    cols = GRID_POSITIONS if cols is None else np.asarray(cols, dtype=np.int64)
    return kernels.correlate_at_points(img, kernel, rows, cols)


def filter_response(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """32x32 complex response grid of the canonical 721x721 feature crop."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (FEATURE_SIZE, FEATURE_SIZE):
        raise ValueError(
            f"feature crop must be {FEATURE_SIZE}x{FEATURE_SIZE}, got {img.shape}"
        )
    return response_grid(img, kernel)


def quantize(grid: np.ndarray) -> Fingerprint:
    """Two bits per grid entry, row-major: (Re >= 0) then (Im >= 0)."""
    grid = np.asarray(grid)
    if grid.shape != (GRID_SIZE, GRID_SIZE):
        raise ValueError(f"response grid must be {GRID_SIZE}x{GRID_SIZE}, got {grid.shape}")
    if not np.all(np.isfinite(grid.real)) or not np.all(np.isfinite(grid.imag)):
        raise ValueError("response grid contains non-finite values")
    bits = np.empty(2 * GRID_SIZE * GRID_SIZE, dtype=bool)
    bits[0::2] = grid.real.ravel() >= 0.0
    bits[1::2] = grid.imag.ravel() >= 0.0
    return Fingerprint(bits)


def extract(img: np.ndarray, p: GaborParams) -> Fingerprint:
    """Feature crop -> fingerprint with the kernel described by ``p``."""
    return quantize(filter_response(img, build_kernel(p)))


def tune_filter(
    images: Mapping[Tuple[int, int], np.ndarray],
    u_values: Iterable[int],
    v_values: Iterable[int],
    base: GaborParams = GaborParams(),
) -> GaborParams:
    """Pick the (u, v) with the highest decidability on a labelled image set.

    ``images`` maps (note, sample) to feature crops; at least two notes
    with two samples each are required.  Ties break toward lower u, then
    lower v.  Degenerate score sets (zero pooled variance) raise.
    """
    from .biometric import decidability, score_set

    candidates = sorted((u, v) for u in set(u_values) for v in set(v_values))
    if not candidates:
        raise ValueError("empty search space")
    notes = {s for s, _ in images}
    samples = {t for _, t in images}
    if len(notes) < 2 or len(samples) < 2:
        raise ValueError("tuning needs at least 2 notes with 2 samples each")

    best = None
    best_d = -math.inf
    for u, v in candidates:
        params = replace(base, u=u, v=v)
        fps = {key: extract(img, params) for key, img in images.items()}
        d = decidability(score_set(fps, inter_pairs="all"))
        if d > best_d:
            best = params
            best_d = d
    return best
