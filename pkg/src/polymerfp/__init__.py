"""Fingerprinting toolkit for the translucent texture of polymer substrates.

The package turns back-lit images of a polymer substrate into compact
2048-bit fingerprints, matches them by fractional Hamming distance, and
evaluates the resulting system with both biometric-style and PUF-style
metrics.  A seeded simulator stands in for physical scans, and the
``protocol`` module implements online (database) and offline (signed
payload) authentication flows on top of the fingerprints.
"""

from .fingerprint import (
    DEFAULT_THRESHOLD,
    FINGERPRINT_BITS,
    Fingerprint,
    MatchResult,
    decide,
    hamming,
)

__all__ = [
    "DEFAULT_THRESHOLD",
    "FINGERPRINT_BITS",
    "Fingerprint",
    "MatchResult",
    "decide",
    "hamming",
]

__version__ = "0.1.0"
