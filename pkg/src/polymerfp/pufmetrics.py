"""PUF quality metrics over a (note, sample, bit) fingerprint tensor.

Six metrics grouped by dimension: uniformity and randomness (space),
reliability and steadiness (time), uniqueness and bit-aliasing (device).
Uniqueness is reported twice: the filter-bank literature's constant
2/(T^2 S (S-1) L) double-counts ordered note pairs, so next to that
per-note form we report a mean-cross-HD variant whose ideal value of
0.5 matches the other device metrics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .fingerprint import FINGERPRINT_BITS, Fingerprint


class NoteDataset:
    """Complete rectangular grid of fingerprints: S notes x T samples."""

    def __init__(self, bits: np.ndarray):
        arr = np.asarray(bits)
        if arr.ndim != 3 or arr.shape[2] != FINGERPRINT_BITS:
            raise ValueError(
                f"expected (S, T, {FINGERPRINT_BITS}) bit tensor, got {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("dataset needs at least one note and one sample")
        self._bits = arr.astype(np.uint8)
        self._bits.setflags(write=False)

    @classmethod
    def from_fingerprints(
        cls, fingerprints: Mapping[Tuple[int, int], Fingerprint]
    ) -> "NoteDataset":
        notes = sorted({s for s, _ in fingerprints})
        samples = sorted({t for _, t in fingerprints})
        expected = {(s, t) for s in notes for t in samples}
        if set(fingerprints) != expected:
            raise ValueError("fingerprints must form a complete (note, sample) grid")
        bits = np.stack(
            [
                np.stack([fingerprints[s, t].bits for t in samples], axis=0)
                for s in notes
            ],
            axis=0,
        )
        return cls(bits)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def num_notes(self) -> int:
        return self._bits.shape[0]

    @property
    def samples_per_note(self) -> int:
        return self._bits.shape[1]

    def fingerprint(self, s: int, t: int) -> Fingerprint:
        return Fingerprint(self._bits[s, t])

    def fingerprint_map(self) -> Dict[Tuple[int, int], Fingerprint]:
        return {
            (s, t): self.fingerprint(s, t)
            for s in range(self.num_notes)
            for t in range(self.samples_per_note)
        }


def _check_note(d: NoteDataset, s: int) -> None:
    if not 0 <= s < d.num_notes:
        raise IndexError(f"note index {s} outside 0..{d.num_notes - 1}")


def uniformity(d: NoteDataset, s: int, t: int) -> float:
    """Fraction of ones in sample t of note s."""
    _check_note(d, s)
    if not 0 <= t < d.samples_per_note:
        raise IndexError(f"sample index {t} outside 0..{d.samples_per_note - 1}")
    return float(d.bits[s, t].sum(dtype=np.int64)) / FINGERPRINT_BITS


def randomness(d: NoteDataset, s: int) -> float:
    """-log2 max(p, 1-p) for the overall one-rate p of note s."""
    _check_note(d, s)
    p = float(d.bits[s].sum(dtype=np.int64)) / (d.samples_per_note * FINGERPRINT_BITS)
    return -math.log2(max(p, 1.0 - p))


def reliability(d: NoteDataset, s: int) -> float:
    """1 - mean bitwise disagreement over all sample pairs of note s."""
    _check_note(d, s)
    t = d.samples_per_note
    if t < 2:
        raise ValueError("reliability needs at least 2 samples per note")
    ones = d.bits[s].sum(axis=0, dtype=np.int64)
    differing = int((ones * (t - ones)).sum())  # unordered differing pairs per bit
    return 1.0 - 2.0 * differing / (t * (t - 1) * FINGERPRINT_BITS)


def steadiness(d: NoteDataset, s: int) -> float:
    """1 + mean_l log2 max(p_l, 1-p_l) with p_l the per-bit one-rate of note s."""
    _check_note(d, s)
    p = d.bits[s].sum(axis=0, dtype=np.int64) / d.samples_per_note
    return 1.0 + float(np.log2(np.maximum(p, 1.0 - p)).mean())


def _cross_disagreements(d: NoteDataset, s: int) -> int:
    # XOR count between every sample of note s and every sample of the others.
    t = d.samples_per_note
    ones_s = d.bits[s].sum(axis=0, dtype=np.int64)
    ones_all = d.bits.sum(axis=(0, 1), dtype=np.int64)
    ones_other = ones_all - ones_s
    zeros_other = (d.num_notes - 1) * t - ones_other
    return int((ones_s * zeros_other + (t - ones_s) * ones_other).sum())


def uniqueness(d: NoteDataset, s: int) -> float:
    """Cross-note disagreement of note s with the 2/(T^2 S (S-1) L) constant.

    The constant counts ordered note pairs, so the per-note value tops
    out at 2/S rather than 1; see ``uniqueness_mean_hd`` for the
    mean-HD reading whose ideal value is 0.5.
    """
    _check_note(d, s)
    if d.num_notes < 2:
        raise ValueError("uniqueness needs at least 2 notes")
    t = d.samples_per_note
    denom = t * t * d.num_notes * (d.num_notes - 1) * FINGERPRINT_BITS
    return 2.0 * _cross_disagreements(d, s) / denom


def uniqueness_mean_hd(d: NoteDataset, s: int) -> float:
    """Mean fractional HD between samples of note s and all other notes."""
    _check_note(d, s)
    if d.num_notes < 2:
        raise ValueError("uniqueness needs at least 2 notes")
    t = d.samples_per_note
    denom = t * t * (d.num_notes - 1) * FINGERPRINT_BITS
    return _cross_disagreements(d, s) / denom


def bit_aliasing(d: NoteDataset, l: int) -> float:
    """One-rate of bit position l across every (note, sample)."""
    if not 0 <= l < FINGERPRINT_BITS:
        raise IndexError(f"bit index {l} outside 0..{FINGERPRINT_BITS - 1}")
    return float(d.bits[:, :, l].sum(dtype=np.int64)) / (
        d.num_notes * d.samples_per_note
    )


@dataclass(frozen=True)
class PufReport:
    """All six metrics with per-item vectors and their means."""

    uniformity: np.ndarray  # (S, T)
    randomness: np.ndarray  # (S,)
    reliability: Optional[np.ndarray]  # (S,), None when T == 1
    steadiness: np.ndarray  # (S,)
    uniqueness_mean_hd: np.ndarray  # (S,)
    uniqueness_eq: np.ndarray  # (S,), ordered-pair constant as printed
    bit_aliasing: np.ndarray  # (L,)
    means: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, dict]:
        def summary(values: Optional[np.ndarray]):
            if values is None:
                return None
            flat = np.asarray(values, dtype=np.float64).ravel()
            return {
                "mean": float(flat.mean()),
                "min": float(flat.min()),
                "max": float(flat.max()),
                "per_item": [float(v) for v in flat],
            }

        return {
            "uniformity": summary(self.uniformity),
            "randomness": summary(self.randomness),
            "steadiness": summary(self.steadiness),
            "reliability": summary(self.reliability),
            "uniqueness": summary(self.uniqueness_mean_hd),
            "uniqueness_ordered_pairs": summary(self.uniqueness_eq),
            "bit_aliasing": summary(self.bit_aliasing),
        }


def puf_report(d: NoteDataset) -> PufReport:
    """Evaluate all six metrics; reliability is omitted (with a warning) for T=1."""
    if d.num_notes < 2:
        raise ValueError("a report needs at least 2 notes")
    s_range = range(d.num_notes)
    uni = np.array(
        [[uniformity(d, s, t) for t in range(d.samples_per_note)] for s in s_range]
    )
    rand = np.array([randomness(d, s) for s in s_range])
    stead = np.array([steadiness(d, s) for s in s_range])
    uniq_hd = np.array([uniqueness_mean_hd(d, s) for s in s_range])
    uniq_eq = np.array([uniqueness(d, s) for s in s_range])
    alias = d.bits.sum(axis=(0, 1), dtype=np.int64) / (
        d.num_notes * d.samples_per_note
    )
    if d.samples_per_note >= 2:
        rel = np.array([reliability(d, s) for s in s_range])
    else:
        warnings.warn("single sample per note: reliability omitted", stacklevel=2)
        rel = None
    means = {
        "uniformity": float(uni.mean()),
        "randomness": float(rand.mean()),
        "steadiness": float(stead.mean()),
        "reliability": None if rel is None else float(rel.mean()),
        "uniqueness": float(uniq_hd.mean()),
        "uniqueness_ordered_pairs": float(uniq_eq.mean()),
        "bit_aliasing": float(alias.mean()),
    }
    return PufReport(
        uniformity=uni,
        randomness=rand,
        reliability=rel,
        steadiness=stead,
        uniqueness_mean_hd=uniq_hd,
        uniqueness_eq=uniq_eq,
        bit_aliasing=alias,
        means=means,
    )
