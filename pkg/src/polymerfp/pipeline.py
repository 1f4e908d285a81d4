"""Capture-to-fingerprint wiring shared by the CLI and the evaluation suite."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .config import Config, DEFAULT_CONFIG
from .fingerprint import Fingerprint
from .gabor import extract
from .imaging import crop_feature_area, detect_markers, load_pgm, rotate, rotation_angle
from .synth import ManifestRow, load_manifest


def note_fingerprint(img: np.ndarray, cfg: Config = DEFAULT_CONFIG, align: bool = True) -> Fingerprint:
    """Full extraction pipeline for one capture.

    With ``align`` the markers are detected, the measured rotation is
    undone, markers are re-detected on the straightened image and the
    feature area is cropped.  Without it the input must already be the
    canonical feature crop.
    """
    if align:
        markers = detect_markers(img, cfg.marker_threshold)
        straight = rotate(img, -rotation_angle(markers))
        markers = detect_markers(straight, cfg.marker_threshold)
        crop = crop_feature_area(straight, markers, cfg.layout)
    else:
        crop = np.asarray(img, dtype=np.float64)
        if crop.shape != (cfg.layout.feature_size, cfg.layout.feature_size):
            raise ValueError(
                f"expected a pre-cropped {cfg.layout.feature_size}x"
                f"{cfg.layout.feature_size} feature area, got {crop.shape}"
            )
    return extract(crop, cfg.gabor)


def manifest_fingerprints(
    manifest_path, cfg: Config = DEFAULT_CONFIG
) -> Tuple[Dict[Tuple[int, int], Fingerprint], List[ManifestRow]]:
    """Extract a fingerprint for every manifest row.

    Notes and samples are mapped to dense zero-based indices in sorted
    (note_id, sample_id) order, so downstream statistics are independent
    of manifest row order.
    """
    rows = load_manifest(manifest_path)
    base = Path(manifest_path).parent
    note_ids = sorted({r.note_id for r in rows})
    note_index = {nid: i for i, nid in enumerate(note_ids)}
    sample_ids = {nid: sorted(r.sample_id for r in rows if r.note_id == nid) for nid in note_ids}
    fingerprints: Dict[Tuple[int, int], Fingerprint] = {}
    for row in sorted(rows, key=lambda r: (r.note_id, r.sample_id)):
        img = load_pgm(base / row.path)
        s = note_index[row.note_id]
        t = sample_ids[row.note_id].index(row.sample_id)
        fingerprints[(s, t)] = note_fingerprint(img, cfg, align=True)
    return fingerprints, rows
