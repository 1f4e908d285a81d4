"""Seeded simulator for back-lit polymer substrates and their capture.

The translucent pattern of a note is modelled as Gaussian-smoothed white
noise (the uneven coating thickness) plus randomly placed dark disks
(ink impurities), with two dark fiducial squares stamped at the layout
positions.  Capture adds rotation, brightness jitter, sensor noise and,
for the scribbling condition, dark curvilinear streaks.

All randomness flows from 64-bit seeds through numpy's PCG64 generator;
child seeds derive from the master seed as the first 8 bytes of
SHA-256("polymerfp" | master | s | t), so any (note, sample) can be
regenerated independently.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .imaging import DEFAULT_LAYOUT, NoteLayout, rotate, save_pgm

#: Mean transmittance of the clean coating.
BASE_LEVEL = 0.55

#: Stamped intensity of the fiducial squares.
MARKER_INTENSITY = 0.02

#: Darkest value impurities and streaks may reach; keeps them clearly
#: above the marker-detection threshold so they can never masquerade as
#: fiducials.
DARK_FLOOR = 0.15

IMPURITY_DROP = (0.3, 0.8)

CONDITIONS = ("benchmark", "rotated", "scribbled", "soaked", "folded", "camera")


def child_seed(master: int, s: int, t: int) -> int:
    """Deterministic 64-bit child seed for note s, sample t."""
    payload = b"polymerfp" + (master & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
    payload += s.to_bytes(4, "big") + t.to_bytes(4, "big")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


@dataclass(frozen=True)
class SubstrateModel:
    """Generative parameters of one note's translucent pattern."""

    seed: int
    height: int = 900
    width: int = 900
    thickness_corr_length: float = 8.0  # 1/e autocorrelation lag of the field
    thickness_contrast: float = 0.35
    impurity_density: float = 300.0  # expected count per megapixel
    impurity_radius_range: Tuple[int, int] = (1, 4)
    layout: NoteLayout = field(default=DEFAULT_LAYOUT)

    def __post_init__(self):
        if self.thickness_corr_length < 1.0:
            raise ValueError("thickness_corr_length must be >= 1")
        if not 0.0 < self.thickness_contrast < 1.0:
            raise ValueError("thickness_contrast must lie in (0, 1)")
        if self.impurity_density < 0.0:
            raise ValueError("impurity_density must be >= 0")
        lo, hi = self.impurity_radius_range
        if lo < 1 or hi < lo:
            raise ValueError("impurity_radius_range must be nonempty with min >= 1")


@dataclass(frozen=True)
class CaptureModel:
    """Parameters of one acquisition of a note."""

    seed: int
    noise_sigma: float = 0.02
    rotation: float = 0.0
    brightness_jitter: float = 0.01
    occlusions: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if abs(self.rotation) > 10.0:
            raise ValueError("|rotation| must be <= 10 degrees")
        if self.occlusions < 0:
            raise ValueError("occlusions must be >= 0")


def _disk_mask(radius: int) -> np.ndarray:
    extent = np.arange(-radius, radius + 1)
    return extent[:, None] ** 2 + extent[None, :] ** 2 <= radius * radius


def generate_note(model: SubstrateModel) -> Tuple[np.ndarray, NoteLayout]:
    """Render a note's ground-truth transmittance image.

    Returns the image together with the layout used to stamp the
    fiducials, whose ``feature_offset`` locates the ground-truth
    feature patch.
    """
    rng = np.random.Generator(np.random.PCG64(model.seed))
    shape = (model.height, model.width)
    white = rng.standard_normal(shape)
    # Gaussian smoothing with sigma = corr_length / 2 puts the field's
    # 1/e autocorrelation lag at corr_length.
    fieldarr = ndimage.gaussian_filter(white, sigma=model.thickness_corr_length / 2.0)
    fieldarr -= fieldarr.mean()
    std = fieldarr.std()
    if std > 0:
        fieldarr *= (model.thickness_contrast / 4.0) / std
    img = np.clip(BASE_LEVEL + fieldarr, 0.0, 1.0)

    count = rng.poisson(model.impurity_density * model.height * model.width / 1e6)
    if count:
        ys = rng.integers(0, model.height, size=count)
        xs = rng.integers(0, model.width, size=count)
        lo, hi = model.impurity_radius_range
        radii = rng.integers(lo, hi + 1, size=count)
        drops = rng.uniform(IMPURITY_DROP[0], IMPURITY_DROP[1], size=count)
        for y, x, r, drop in zip(ys, xs, radii, drops):
            y0, y1 = max(0, y - r), min(model.height, y + r + 1)
            x0, x1 = max(0, x - r), min(model.width, x + r + 1)
            mask = _disk_mask(int(r))[
                y0 - (y - r) : y1 - (y - r), x0 - (x - r) : x1 - (x - r)
            ]
            patch = img[y0:y1, x0:x1]
            patch[mask] = np.maximum(patch[mask] - drop, DARK_FLOOR)

    layout = model.layout
    for mx, my in (layout.marker1, layout.marker2):
        h = layout.marker_half
        img[my - h : my + h + 1, mx - h : mx + h + 1] = MARKER_INTENSITY
    return img, layout


def _feature_rect(layout: NoteLayout) -> Tuple[int, int, int, int]:
    mx, my = layout.marker1
    ox = mx + layout.feature_offset[0]
    oy = my + layout.feature_offset[1]
    return ox, oy, ox + layout.feature_size, oy + layout.feature_size


def _stamp_streaks(img: np.ndarray, rng: np.random.Generator, count: int, layout: NoteLayout) -> None:
    # Random-walk dark curves confined to the feature area, imitating
    # hairs and fibres lying on the note during capture.
    x0, y0, x1, y1 = _feature_rect(layout)
    margin = 40
    for _ in range(count):
        x = rng.uniform(x0 + margin, x1 - margin)
        y = rng.uniform(y0 + margin, y1 - margin)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        steps = int(rng.integers(120, 320))
        width = int(rng.integers(1, 4))
        for _ in range(steps):
            heading += rng.normal(0.0, 0.25)
            x += math.cos(heading)
            y += math.sin(heading)
            if not (x0 + 2 <= x < x1 - 2 and y0 + 2 <= y < y1 - 2):
                break
            cx, cy = int(round(x)), int(round(y))
            half = width // 2
            patch = img[cy - half : cy + half + 1, cx - half : cx + half + 1]
            np.maximum(patch * 0.45, DARK_FLOOR, out=patch)


def stamp_crease(img: np.ndarray, rng: np.random.Generator, layout: NoteLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Fold line: a 1-px-wide low-contrast vertical darkening."""
    x0, _, x1, _ = _feature_rect(layout)
    col = int(rng.integers(x0 + 20, x1 - 20))
    out = img.copy()
    out[:, col] = np.clip(out[:, col] - 0.08, 0.0, 1.0)
    return out


def capture(note: np.ndarray, c: CaptureModel, layout: NoteLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Simulate one acquisition of a note image.

    With zero rotation, jitter, noise and occlusions this is the
    identity.  Deterministic given the capture seed.
    """
    rng = np.random.Generator(np.random.PCG64(c.seed))
    img = note.astype(np.float64, copy=True)
    if c.rotation != 0.0:
        img = rotate(img, c.rotation)
    if c.brightness_jitter > 0.0:
        img = img * (1.0 + rng.uniform(-c.brightness_jitter, c.brightness_jitter))
    if c.noise_sigma > 0.0:
        img = img + rng.normal(0.0, c.noise_sigma, size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    if c.occlusions > 0:
        _stamp_streaks(img, rng, c.occlusions, layout)
    return img


def condition_capture(condition: str, seed: int, angle_seed: int) -> Tuple[CaptureModel, bool]:
    """Capture model for a dataset condition; returns (model, crease?)."""
    if condition == "benchmark":
        return CaptureModel(seed=seed), False
    if condition == "rotated":
        angle_rng = np.random.Generator(np.random.PCG64(angle_seed))
        return CaptureModel(seed=seed, rotation=float(angle_rng.uniform(-10.0, 10.0))), False
    if condition == "scribbled":
        return CaptureModel(seed=seed, occlusions=12), False
    if condition == "soaked":
        return CaptureModel(seed=seed, brightness_jitter=0.02), False
    if condition == "folded":
        return CaptureModel(seed=seed), True
    if condition == "camera":
        return CaptureModel(seed=seed, noise_sigma=0.035, brightness_jitter=0.02), False
    raise ValueError(f"unknown condition {condition!r}, expected one of {CONDITIONS}")


@dataclass(frozen=True)
class ManifestRow:
    note_id: str
    sample_id: int
    path: str
    condition: str
    seed: str  # capture child seed, 16 hex digits


# Offsets keeping per-sample seed streams (capture noise, rotation draw,
# crease position) disjoint in the t argument of child_seed.
_ANGLE_STREAM = 1 << 20
_CREASE_STREAM = 2 << 20


def make_sample(
    master_seed: int,
    s: int,
    t: int,
    condition: str = "benchmark",
    substrate: Optional[SubstrateModel] = None,
    note_img: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Render capture t of note s without touching the filesystem."""
    model = substrate or SubstrateModel(seed=child_seed(master_seed, s, 0))
    if note_img is None:
        note_img, _ = generate_note(model)
    cm, crease = condition_capture(
        condition,
        child_seed(master_seed, s, t),
        child_seed(master_seed, s, t + _ANGLE_STREAM),
    )
    img = capture(note_img, cm, model.layout)
    if crease:
        crease_rng = np.random.Generator(
            np.random.PCG64(child_seed(master_seed, s, t + _CREASE_STREAM))
        )
        img = stamp_crease(img, crease_rng, model.layout)
    return img


def generate_dataset(
    out_dir,
    notes: int,
    samples: int,
    condition: str = "benchmark",
    master_seed: int = 0,
    substrate_overrides: Optional[dict] = None,
) -> List[ManifestRow]:
    """Write ``notes x samples`` PGM captures plus a JSON-lines manifest.

    Files are written atomically (temp file, then rename).  Regeneration
    from the same master seed is byte-identical.
    """
    if notes < 1 or samples < 1:
        raise ValueError("notes and samples must be >= 1")
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}, expected one of {CONDITIONS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    overrides = substrate_overrides or {}
    rows: List[ManifestRow] = []
    for s in range(1, notes + 1):
        model = SubstrateModel(seed=child_seed(master_seed, s, 0), **overrides)
        note_img, _ = generate_note(model)
        for t in range(1, samples + 1):
            img = make_sample(master_seed, s, t, condition, model, note_img)
            name = f"n{s:03d}_t{t:02d}.pgm"
            tmp = out / (name + ".tmp")
            save_pgm(img, tmp)
            os.replace(tmp, out / name)
            rows.append(
                ManifestRow(
                    note_id=f"{s:03d}",
                    sample_id=t,
                    path=name,
                    condition=condition,
                    seed=f"{child_seed(master_seed, s, t):016x}",
                )
            )
    manifest = out / "manifest.jsonl"
    tmp = out / "manifest.jsonl.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {
                        "note_id": row.note_id,
                        "sample_id": row.sample_id,
                        "path": row.path,
                        "condition": row.condition,
                        "seed": row.seed,
                    }
                )
                + "\n"
            )
    os.replace(tmp, manifest)
    return rows


def load_manifest(path) -> List[ManifestRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            rows.append(
                ManifestRow(
                    note_id=str(obj["note_id"]),
                    sample_id=int(obj["sample_id"]),
                    path=str(obj["path"]),
                    condition=str(obj["condition"]),
                    seed=str(obj["seed"]),
                )
            )
    if not rows:
        raise ValueError(f"empty manifest: {path}")
    return rows
