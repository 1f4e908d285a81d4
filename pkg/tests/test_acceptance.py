"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured values (run with ``pytest -v -s``).

The statistical criteria run on seeded synthetic datasets; the physical
corpus behind the published numbers is not reproducible, so the
simulator stands in and the checks target the same statistics at desk
scale.
"""

import base64
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from polymerfp import biometric, pufmetrics
from polymerfp.biometric import (
    cumulative_binomial,
    decidability,
    degrees_of_freedom,
    score_set,
    sphere_packing_attempts,
    sphere_packing_attempts_exact,
)
from polymerfp.cli import main
from polymerfp.fingerprint import Fingerprint, hamming
from polymerfp.gabor import GaborParams, build_kernel, response_grid
from polymerfp.pipeline import note_fingerprint
from polymerfp.protocol import (
    PayloadError,
    NoteRecord,
    keygen,
    load_private_key,
    load_public_key,
    register_offline,
    verify_offline,
    QR_V18_M_CAPACITY,
)
from polymerfp.pufmetrics import NoteDataset, puf_report
from polymerfp.synth import SubstrateModel, child_seed, generate_note, make_sample

from test_gabor import brute_force_response

THRESHOLD = 0.33
BENCH_MASTER = 20260809
BENCH_NOTES, BENCH_SAMPLES = 100, 10
ROBUST_MASTER = 31337
ROBUST_NOTES, ROBUST_SAMPLES = 40, 5


def report(criterion, message):
    print(f"\n[criterion {criterion}] PASS  {message}")


def build_condition(master, notes, samples, condition):
    fingerprints = {}
    for s in range(1, notes + 1):
        model = SubstrateModel(seed=child_seed(master, s, 0))
        note, _ = generate_note(model)
        for t in range(1, samples + 1):
            img = make_sample(master, s, t, condition, model, note)
            fingerprints[(s, t)] = note_fingerprint(img)
    return fingerprints


@pytest.fixture(scope="session")
def benchmark():
    start = time.time()
    fingerprints = build_condition(BENCH_MASTER, BENCH_NOTES, BENCH_SAMPLES, "benchmark")
    elapsed = time.time() - start
    return fingerprints, elapsed


@pytest.fixture(scope="session")
def benchmark_scores(benchmark):
    fingerprints, _ = benchmark
    return score_set(fingerprints)


def test_criterion_1_false_match_table():
    published = {
        0.30: 3.5e-34, 0.31: 6.0e-31, 0.32: 6.7e-28, 0.33: 5.0e-25,
        0.34: 2.5e-22, 0.35: 8.2e-20, 0.36: 1.9e-17, 0.37: 2.9e-15,
        0.38: 3.0e-13, 0.39: 2.2e-11, 0.40: 1.1e-9,
    }
    start = time.time()
    computed = {t: biometric.binomial_false_match(900, t) for t in published}
    elapsed = time.time() - start
    for theta, expected in published.items():
        assert expected / 3 <= computed[theta] <= expected * 3, (theta, computed[theta])
    assert elapsed < 1.0
    report(1, f"11/11 rows within factor 3 of the published table in {elapsed * 1e3:.0f} ms")


def test_criterion_2_sphere_packing():
    attempts = sphere_packing_attempts(900, 297)
    assert 2e24 <= attempts <= 8e24
    exact = sphere_packing_attempts_exact(900, 297)
    covered = sum(math.comb(900, i) for i in range(298))
    assert exact * covered == 2**900  # bit-exact identity
    report(2, f"attempts = {attempts:.2e}, exact identity 2^900 = N' * sum C(900,i) holds")


def test_criterion_3_benchmark_statistics(benchmark, benchmark_scores):
    _, elapsed = benchmark
    scores = benchmark_scores
    assert scores.inter.size == 4950 and scores.intra.size == 4500
    inter_mean = float(scores.inter.mean())
    dof = degrees_of_freedom(scores.inter)
    d_prime = decidability(scores)
    frr = float((scores.intra > THRESHOLD).mean())
    far = float((scores.inter <= THRESHOLD).mean())
    assert 0.49 <= inter_mean <= 0.51
    assert dof >= 500
    assert d_prime >= 10
    assert frr == 0.0 and far == 0.0
    assert elapsed < 300.0
    report(
        3,
        f"inter mean {inter_mean:.4f}, DoF {dof:.0f}, d' {d_prime:.1f}, "
        f"FRR=FAR=0 at {THRESHOLD} over 4950+4500 pairs, built in {elapsed:.0f} s",
    )


def test_criterion_4_puf_directionality(benchmark):
    fingerprints, _ = benchmark
    dataset = NoteDataset.from_fingerprints(fingerprints)
    means = puf_report(dataset).means
    assert 0.48 <= means["uniformity"] <= 0.52
    assert means["randomness"] >= 0.95
    assert means["steadiness"] >= 0.90
    assert means["reliability"] >= 0.90
    assert 0.48 <= means["uniqueness"] <= 0.52
    assert 0.48 <= means["bit_aliasing"] <= 0.52
    report(
        4,
        "uniformity {uniformity:.3f}, randomness {randomness:.3f}, steadiness "
        "{steadiness:.3f}, reliability {reliability:.3f}, uniqueness {uniqueness:.3f}, "
        "bit-aliasing {bit_aliasing:.3f}".format(**means),
    )


def test_criterion_5_robustness(benchmark_scores):
    bench_intra_mean = float(benchmark_scores.intra.mean())
    results = {}
    for condition in ("rotated", "scribbled"):
        fingerprints = build_condition(ROBUST_MASTER, ROBUST_NOTES, ROBUST_SAMPLES, condition)
        scores = score_set(fingerprints)
        frr = float((scores.intra > THRESHOLD).mean())
        far = float((scores.inter <= THRESHOLD).mean())
        assert frr == 0.0 and far == 0.0, condition
        results[condition] = float(scores.intra.mean())
    assert results["scribbled"] > bench_intra_mean
    report(
        5,
        f"FRR=FAR=0 at {THRESHOLD} for rotated and scribbled; intra mean "
        f"benchmark {bench_intra_mean:.3f} -> scribbled {results['scribbled']:.3f} "
        f"(rotated {results['rotated']:.3f})",
    )


def test_criterion_6_gabor_correctness():
    rng = np.random.default_rng(606)
    kernel = build_kernel(GaborParams())
    grid = np.arange(50, 150, 20)
    worst = 0.0
    for _ in range(20):
        img = rng.uniform(0.0, 1.0, size=(200, 200))
        fast = response_grid(img, kernel, grid, grid)
        slow = brute_force_response(img, kernel, grid, grid)
        rel = float(np.max(np.abs(fast - slow)) / np.max(np.abs(slow)))
        worst = max(worst, rel)
        assert rel <= 1e-9
    spectrum = np.abs(np.fft.fft2(kernel))
    i, j = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    freqs = np.fft.fftfreq(kernel.shape[0])
    peak = math.hypot(freqs[i], freqs[j])
    assert abs(peak - 0.0625) <= 1.0 / kernel.shape[0]
    report(
        6,
        f"20/20 oracle comparisons, worst relative error {worst:.2e}; "
        f"kernel FFT peak {peak:.4f} cycles/px (target 0.0625, bin {1 / kernel.shape[0]:.4f})",
    )


def test_criterion_7_equation_oracles():
    tol = 1e-12

    def pair_with(mean, sample_std):
        d = sample_std / math.sqrt(2.0)
        return np.array([mean - d, mean + d])

    s = biometric.ScoreSet(intra=pair_with(0.1, 0.1), inter=pair_with(0.5, 0.1))
    assert abs(decidability(s) - 4.0) < tol
    assert abs(degrees_of_freedom(pair_with(0.5, 0.5)) - 1.0) < tol
    assert abs(degrees_of_freedom(pair_with(0.5, 0.05)) - 100.0) < 1e-9

    L = 2048
    ones = np.ones(L, dtype=np.uint8)
    zeros = np.zeros(L, dtype=np.uint8)
    half = np.concatenate([np.ones(1024, dtype=np.uint8), np.zeros(1024, dtype=np.uint8)])
    rng = np.random.default_rng(7)
    base = rng.integers(0, 2, size=L).astype(np.uint8)
    flipped = base.copy()
    flipped[:204] ^= 1

    d = NoteDataset(np.array([[ones, half]]))
    assert abs(pufmetrics.uniformity(d, 0, 0) - 1.0) < tol
    assert abs(pufmetrics.uniformity(d, 0, 1) - 0.5) < tol
    assert abs(pufmetrics.randomness(d, 0) - 0.4150374992788438) < tol  # p = 0.75

    d = NoteDataset(np.array([[base, flipped]]))
    assert abs(pufmetrics.reliability(d, 0) - 0.900390625) < tol
    d = NoteDataset(np.array([[base, 1 - base]]))
    assert abs(pufmetrics.steadiness(d, 0) - 0.0) < tol
    d = NoteDataset(np.array([[base, base]]))
    assert abs(pufmetrics.steadiness(d, 0) - 1.0) < tol

    d = NoteDataset(np.array([[ones, ones], [zeros, zeros]]))
    assert abs(pufmetrics.uniqueness(d, 0) - 1.0) < tol
    assert abs(pufmetrics.uniqueness_mean_hd(d, 0) - 1.0) < tol
    assert abs(pufmetrics.bit_aliasing(d, 0) - 0.5) < tol
    report(7, "decidability, DoF and all six metrics match hand values to 1e-12")


def test_criterion_8_protocol_end_to_end(tmp_path):
    # two captures of the same note, one capture of a different note
    model_a = SubstrateModel(seed=child_seed(808, 1, 0))
    note_a, _ = generate_note(model_a)
    fp_enroll = note_fingerprint(make_sample(808, 1, 1, "benchmark", model_a, note_a))
    fp_fresh = note_fingerprint(make_sample(808, 1, 2, "benchmark", model_a, note_a))
    model_b = SubstrateModel(seed=child_seed(808, 2, 0))
    note_b, _ = generate_note(model_b)
    fp_other = note_fingerprint(make_sample(808, 2, 1, "benchmark", model_b, note_b))

    keygen(tmp_path / "k.pem", tmp_path / "k.pub")
    private = load_private_key(tmp_path / "k.pem")
    public = load_public_key(tmp_path / "k.pub")
    record = NoteRecord(serial="AK47102933", denomination=1000, fingerprint=fp_enroll)
    payload = register_offline(record, private)
    text = payload.to_base64()
    assert len(text) <= QR_V18_M_CAPACITY

    same = verify_offline(text, fp_fresh, public, THRESHOLD)
    assert same.signature_valid and same.match.accepted

    other = verify_offline(text, fp_other, public, THRESHOLD)
    assert other.signature_valid and not other.match.accepted
    assert 0.4 < other.match.hd < 0.6

    raw = payload.encode()
    rng = np.random.default_rng(88)
    signature_invalid = 0
    structural = 0
    for _ in range(1000):
        tampered = bytearray(raw)
        pos = int(rng.integers(0, len(raw)))
        tampered[pos] ^= 1 << int(rng.integers(0, 8))
        try:
            outcome = verify_offline(
                base64.b64encode(bytes(tampered)).decode(), fp_fresh, public, THRESHOLD
            )
        except PayloadError:
            structural += 1
            continue
        assert not outcome.signature_valid
        signature_invalid += 1
    assert signature_invalid + structural == 1000
    assert signature_invalid >= 950  # flips outside the tiny header dominate
    report(
        8,
        f"enroll/verify accepts 2nd capture (HD {same.match.hd:.3f}), rejects other note "
        f"(HD {other.match.hd:.3f}); 1000 bit flips: {signature_invalid} signature-invalid, "
        f"{structural} structurally rejected; payload {len(text)} chars <= {QR_V18_M_CAPACITY}",
    )


def test_criterion_9_determinism(tmp_path):
    digests = []
    for run in ("one", "two"):
        data_dir = tmp_path / f"data_{run}"
        out_dir = tmp_path / f"report_{run}"
        assert main(
            ["synth", "--notes", "10", "--samples", "3", "--seed", "424242", "--out", str(data_dir)]
        ) == 0
        assert main(
            ["eval", "--manifest", str(data_dir / "manifest.jsonl"), "--out", str(out_dir)]
        ) == 0
        digests.append(
            (
                (data_dir / "manifest.jsonl").read_bytes(),
                (out_dir / "metrics.json").read_bytes(),
                (out_dir / "puf.json").read_bytes(),
            )
        )
    assert digests[0][0] == digests[1][0], "manifests differ between runs"
    assert digests[0][1] == digests[1][1], "metric reports differ between runs"
    assert digests[0][2] == digests[1][2], "puf reports differ between runs"
    report(9, "two seeded synth+eval runs produced byte-identical manifests and reports")
