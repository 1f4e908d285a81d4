"""Score-distribution statistics for Hamming-distance verification.

Covers the separation measure d', the degrees-of-freedom estimate of a
binomially distributed inter-score population, empirical FRR/FAR/EER
curves, the cumulative-binomial false-match model for one-to-one
comparison, and the sphere-packing lower bound on forgery attempts.
The binomial quantities are computed with exact integer arithmetic
(values reach 1e-34 and beyond, far outside naive float summation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Tuple

import numpy as np

from .fingerprint import Fingerprint, hamming

#: Thresholds of the standard one-to-one false-match table.
FALSE_MATCH_THETAS = tuple(round(0.30 + 0.01 * i, 2) for i in range(11))


@dataclass(frozen=True)
class ScoreSet:
    """Fractional HD populations: same-note pairs vs different-note pairs."""

    intra: np.ndarray
    inter: np.ndarray

    def __post_init__(self):
        for name in ("intra", "inter"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"{name} scores must be 1-D")
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ValueError(f"{name} scores must lie in [0, 1]")
            object.__setattr__(self, name, arr)


def score_set(
    fingerprints: Mapping[Tuple[int, int], Fingerprint], inter_pairs: str = "first"
) -> ScoreSet:
    """Build a ScoreSet from fingerprints keyed by (note, sample).

    Intra scores are all unordered sample pairs within each note,
    enumerated in (s, t, t') order.  Inter scores compare unordered note
    pairs in (s, s', t, t') order: with ``inter_pairs="first"`` only the
    first sample of each note is used, so S notes yield exactly
    S*(S-1)/2 inter scores; ``"all"`` crosses every sample combination.
    """
    if inter_pairs not in ("first", "all"):
        raise ValueError(f"inter_pairs must be 'first' or 'all', got {inter_pairs!r}")
    notes = sorted({s for s, _ in fingerprints})
    samples = {s: sorted(t for s2, t in fingerprints if s2 == s) for s in notes}
    intra = []
    for s in notes:
        ts = samples[s]
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                intra.append(hamming(fingerprints[s, ts[i]], fingerprints[s, ts[j]]))
    inter = []
    for i in range(len(notes)):
        for j in range(i + 1, len(notes)):
            a, b = notes[i], notes[j]
            if inter_pairs == "first":
                inter.append(
                    hamming(fingerprints[a, samples[a][0]], fingerprints[b, samples[b][0]])
                )
            else:
                for ta in samples[a]:
                    for tb in samples[b]:
                        inter.append(hamming(fingerprints[a, ta], fingerprints[b, tb]))
    return ScoreSet(intra=np.array(intra), inter=np.array(inter))


def _mean_std(scores: np.ndarray, name: str) -> Tuple[float, float]:
    if scores.size < 2:
        raise ValueError(f"{name} group needs at least 2 scores")
    return float(scores.mean()), float(scores.std(ddof=1))


def decidability(s: ScoreSet) -> float:
    """d' = |mu1 - mu2| / sqrt((sigma1^2 + sigma2^2) / 2), sample stds."""
    mu1, sd1 = _mean_std(s.intra, "intra")
    mu2, sd2 = _mean_std(s.inter, "inter")
    pooled = (sd1 * sd1 + sd2 * sd2) / 2.0
    if pooled == 0.0:
        raise ValueError("zero pooled variance, d' undefined")
    return abs(mu1 - mu2) / math.sqrt(pooled)


def degrees_of_freedom(inter: Sequence[float]) -> float:
    """Effective Bernoulli-trial count N = mu(1 - mu) / sigma^2."""
    arr = np.asarray(inter, dtype=np.float64)
    mu, sd = _mean_std(arr, "inter")
    if sd == 0.0:
        raise ValueError("zero variance, degrees of freedom undefined")
    return mu * (1.0 - mu) / (sd * sd)


@dataclass(frozen=True)
class ErrorCurve:
    thresholds: np.ndarray
    frr: np.ndarray
    far: np.ndarray
    eer: float
    eer_threshold: float


def error_curves(s: ScoreSet, thresholds: Sequence[float]) -> ErrorCurve:
    """Empirical FRR/FAR sweep and the equal error rate.

    FRR(t) is the fraction of intra scores above t, FAR(t) the fraction
    of inter scores at or below t.  The EER is the midpoint of the two
    rates at the threshold minimizing their gap (first minimum wins).
    """
    thr = np.asarray(thresholds, dtype=np.float64)
    if thr.size == 0:
        raise ValueError("need at least one threshold")
    if np.any(np.diff(thr) < 0):
        raise ValueError("thresholds must be ascending")
    if s.intra.size == 0 or s.inter.size == 0:
        raise ValueError("both score groups must be nonempty")
    frr = (s.intra[None, :] > thr[:, None]).mean(axis=1)
    far = (s.inter[None, :] <= thr[:, None]).mean(axis=1)
    assert np.all(np.diff(frr) <= 0) and np.all(np.diff(far) >= 0)
    idx = int(np.argmin(np.abs(frr - far)))
    eer = float((frr[idx] + far[idx]) / 2.0)
    return ErrorCurve(thresholds=thr, frr=frr, far=far, eer=eer, eer_threshold=float(thr[idx]))


# ---------------------------------------------------------------------------
# Exact binomial tail model and sphere-packing bound
# ---------------------------------------------------------------------------

#: Largest n handled with exact rational arithmetic; beyond this the
#: float paths switch to log-space summation.
EXACT_N_LIMIT = 2048


def cumulative_binomial(n: int, m: int) -> Fraction:
    """P(X <= m) for X ~ Binomial(n, 1/2), exact."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = min(m, n)
    if m < 0:
        return Fraction(0)
    total = sum(math.comb(n, i) for i in range(m + 1))
    return Fraction(total, 2**n)


def _log_lower_tail(n: int, m: int) -> float:
    """log P(X <= m), X ~ Binomial(n, 1/2), for m below the mode.

    The term at i = m dominates; the rest is accumulated downward with a
    running ratio until it stops contributing.
    """
    log_top = math.lgamma(n + 1) - math.lgamma(m + 1) - math.lgamma(n - m + 1)
    total = 1.0
    term = 1.0
    i = m
    while i > 0:
        term *= i / (n - i + 1)  # C(n, i-1) / C(n, i)
        if term < 1e-18 * total:
            break
        total += term
        i -= 1
    return log_top + math.log(total) - n * math.log(2.0)


def binomial_false_match(n: int, theta: float) -> float:
    """Odds that a random fingerprint lands within HD theta of a target.

    Models each of the ``n`` effective degrees of freedom as a fair coin
    and sums the lower binomial tail up to m = floor(theta * n): exact
    rational arithmetic up to n = 2048, log-space beyond.
    """
    if not 0.0 < theta < 0.5:
        raise ValueError(f"theta must lie in (0, 0.5), got {theta}")
    m = math.floor(theta * n)
    if n <= EXACT_N_LIMIT:
        return float(cumulative_binomial(n, m))
    if m < 0:
        return 0.0
    return math.exp(_log_lower_tail(n, m))


def false_match_table(n: int, thetas: Sequence[float] = FALSE_MATCH_THETAS):
    """[(theta, false-match odds)] for the standard threshold sweep."""
    return [(float(t), binomial_false_match(n, t)) for t in thetas]


def sphere_packing_attempts_exact(n: int, w: int) -> Fraction:
    """2^n / sum_{i<=w} C(n, i): attempts to land within radius w, exact."""
    if not 0 <= w <= n:
        raise ValueError(f"radius w={w} outside 0..{n}")
    return Fraction(2**n, sum(math.comb(n, i) for i in range(w + 1)))


def sphere_packing_attempts(n: int, w: int) -> float:
    """Float form of the bound; log-space above the exact-arithmetic limit.

    May return ``inf`` when the attempt count exceeds the float range.
    """
    if not 0 <= w <= n:
        raise ValueError(f"radius w={w} outside 0..{n}")
    if n <= EXACT_N_LIMIT:
        return float(sphere_packing_attempts_exact(n, w))
    # attempts = 1 / P(X <= w); for w at or above the mode use the
    # symmetric complement so the dominant-term summation stays valid
    if 2 * w < n:
        log_p = _log_lower_tail(n, w)
    else:
        log_p = math.log1p(-math.exp(_log_lower_tail(n, n - w - 1))) if w < n else 0.0
    try:
        return math.exp(-log_p)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# Binomial fit report for the inter-score histogram
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinomialFit:
    n_hat: float
    n_rounded: int
    bin_edges: np.ndarray
    bin_centers: np.ndarray
    observed: np.ndarray
    expected: np.ndarray
    mean: float
    skewness: float


def binomial_fit(inter: Sequence[float], bins: int = 100) -> BinomialFit:
    """Fit Binomial(N, 1/2)/N to the inter-score histogram.

    N comes straight from the degrees-of-freedom estimator; the expected
    per-bin counts integrate the exact binomial mass over each bin, so
    they can be compared directly with the observed counts.
    """
    arr = np.asarray(inter, dtype=np.float64)
    if arr.size < 100:
        raise ValueError("binomial_fit needs at least 100 inter scores")
    n_hat = degrees_of_freedom(arr)
    n = int(round(n_hat))
    edges = np.linspace(0.0, 1.0, bins + 1)
    observed, _ = np.histogram(arr, bins=edges)
    # Bin [lo, hi) holds trials k with lo <= k/n < hi; the last bin is closed.
    expected = np.empty(bins, dtype=np.float64)
    prev_cdf = Fraction(0)
    for b in range(bins):
        hi = edges[b + 1]
        top = n if b == bins - 1 else math.ceil(hi * n) - 1
        cdf = cumulative_binomial(n, top) if top >= 0 else Fraction(0)
        expected[b] = float(cdf - prev_cdf) * arr.size
        prev_cdf = cdf
    mean = float(arr.mean())
    centered = arr - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    skew = 0.0 if m2 == 0.0 else m3 / m2**1.5
    return BinomialFit(
        n_hat=n_hat,
        n_rounded=n,
        bin_edges=edges,
        bin_centers=(edges[:-1] + edges[1:]) / 2.0,
        observed=observed,
        expected=expected,
        mean=mean,
        skewness=skew,
    )
