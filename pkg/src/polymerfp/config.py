"""Runtime configuration shared by the CLI commands.

A config is a single JSON document; every field has a default that
reproduces the standard polymer setting, so an empty file or no file at
all is valid.  ``dump_config(load_config(p))`` round-trips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .fingerprint import DEFAULT_THRESHOLD
from .gabor import GaborParams
from .imaging import DEFAULT_LAYOUT, DEFAULT_MARKER_THRESHOLD, NoteLayout


@dataclass(frozen=True)
class Config:
    gabor: GaborParams = field(default_factory=GaborParams)
    threshold: float = DEFAULT_THRESHOLD
    marker_threshold: float = DEFAULT_MARKER_THRESHOLD
    layout: NoteLayout = field(default_factory=NoteLayout)

    def __post_init__(self):
        if not 0.0 < self.threshold < 0.5:
            raise ValueError("threshold must lie in (0, 0.5)")
        if not 0.0 < self.marker_threshold < 1.0:
            raise ValueError("marker_threshold must lie in (0, 1)")


DEFAULT_CONFIG = Config()


def config_to_dict(cfg: Config) -> dict:
    g = cfg.gabor
    lay = cfg.layout
    return {
        "gabor": {
            "f_max": g.f_max,
            "gamma": g.gamma,
            "eta": g.eta,
            "u": g.u,
            "U": g.U,
            "v": g.v,
            "V": g.V,
            "kernel_size": g.kernel_size,
        },
        "threshold": cfg.threshold,
        "marker_threshold": cfg.marker_threshold,
        "layout": {
            "marker1": list(lay.marker1),
            "marker2": list(lay.marker2),
            "marker_half": lay.marker_half,
            "feature_offset": list(lay.feature_offset),
            "feature_size": lay.feature_size,
        },
    }


def config_from_dict(obj: dict) -> Config:
    gabor_kwargs = dict(obj.get("gabor", {}))
    layout_obj = dict(obj.get("layout", {}))
    layout_kwargs = {}
    for key in ("marker1", "marker2", "feature_offset"):
        if key in layout_obj:
            layout_kwargs[key] = tuple(int(v) for v in layout_obj.pop(key))
    layout_kwargs.update(layout_obj)
    return Config(
        gabor=GaborParams(**gabor_kwargs),
        threshold=float(obj.get("threshold", DEFAULT_THRESHOLD)),
        marker_threshold=float(obj.get("marker_threshold", DEFAULT_MARKER_THRESHOLD)),
        layout=NoteLayout(**layout_kwargs) if layout_kwargs else DEFAULT_LAYOUT,
    )


def load_config(path=None) -> Config:
    if path is None:
        return DEFAULT_CONFIG
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def dump_config(cfg: Config) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
