"""2048-bit substrate fingerprints and fractional Hamming distance matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FINGERPRINT_BITS = 2048
FINGERPRINT_BYTES = FINGERPRINT_BITS // 8
HEX_LENGTH = FINGERPRINT_BYTES * 2

#: Default accept/reject threshold on the fractional Hamming distance.
DEFAULT_THRESHOLD = 0.33


class Fingerprint:
    """Immutable 2048-bit feature vector.

    Packed form: byte k holds bits 8k..8k+7 with bit 8k in the most
    significant position.  The hex form is the packed bytes in lowercase.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool, copy=True).ravel()
        if arr.shape != (FINGERPRINT_BITS,):
            raise ValueError(
                f"fingerprint needs exactly {FINGERPRINT_BITS} bits, got {arr.size}"
            )
        arr.setflags(write=False)
        self._bits = arr

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def to_bytes(self) -> bytes:
        return np.packbits(self._bits).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Fingerprint":
        if len(data) != FINGERPRINT_BYTES:
            raise ValueError(f"need {FINGERPRINT_BYTES} bytes, got {len(data)}")
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8)))

    def to_hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "Fingerprint":
        text = text.strip()
        if len(text) != HEX_LENGTH:
            raise ValueError(f"need {HEX_LENGTH} hex chars, got {len(text)}")
        try:
            data = bytes.fromhex(text)
        except ValueError as exc:
            raise ValueError(f"invalid hex fingerprint: {exc}") from None
        return cls.from_bytes(data)

    def complement(self) -> "Fingerprint":
        return Fingerprint(~self._bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        return f"Fingerprint({self.to_hex()[:16]}...)"


def hamming(f1: Fingerprint, f2: Fingerprint) -> float:
    """Fractional Hamming distance: differing bits / 2048."""
    return int(np.count_nonzero(f1.bits ^ f2.bits)) / FINGERPRINT_BITS


@dataclass(frozen=True)
class MatchResult:
    hd: float
    threshold: float
    accepted: bool


def decide(f1: Fingerprint, f2: Fingerprint, threshold: float = DEFAULT_THRESHOLD) -> MatchResult:
    """Accept when the fractional Hamming distance is at or below the threshold."""
    if not 0.0 < threshold < 0.5:
        raise ValueError(f"threshold must lie in (0, 0.5), got {threshold}")
    hd = hamming(f1, f2)
    return MatchResult(hd=hd, threshold=threshold, accepted=hd <= threshold)
