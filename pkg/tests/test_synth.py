import json

import numpy as np
import pytest

from polymerfp.fingerprint import hamming
from polymerfp.gabor import GaborParams, extract
from polymerfp.imaging import load_pgm
from polymerfp.pipeline import note_fingerprint
from polymerfp.synth import (
    CaptureModel,
    SubstrateModel,
    capture,
    child_seed,
    generate_dataset,
    generate_note,
    load_manifest,
    make_sample,
)


def crop_of(note, layout):
    ox = layout.marker1[0] + layout.feature_offset[0]
    oy = layout.marker1[1] + layout.feature_offset[1]
    return note[oy : oy + layout.feature_size, ox : ox + layout.feature_size]


def test_generate_note_deterministic():
    a, _ = generate_note(SubstrateModel(seed=1))
    b, _ = generate_note(SubstrateModel(seed=1))
    assert np.array_equal(a, b)
    c, _ = generate_note(SubstrateModel(seed=2))
    assert not np.array_equal(a, c)


def test_degenerate_model_is_nearly_uniform():
    model = SubstrateModel(seed=3, impurity_density=0.0, thickness_contrast=1e-6)
    note, layout = generate_note(model)
    body = crop_of(note, layout)
    assert body.std() < 1e-5


def test_distinct_seeds_give_independent_fingerprints():
    p = GaborParams()
    hds = []
    for k in range(6):
        n1, lay = generate_note(SubstrateModel(seed=10_000 + 2 * k))
        n2, _ = generate_note(SubstrateModel(seed=10_001 + 2 * k))
        hds.append(hamming(extract(crop_of(n1, lay), p), extract(crop_of(n2, lay), p)))
    assert all(0.44 <= h <= 0.56 for h in hds)


def test_capture_identity_when_all_effects_off():
    note, _ = generate_note(SubstrateModel(seed=5))
    clean = capture(
        note,
        CaptureModel(seed=9, noise_sigma=0.0, rotation=0.0, brightness_jitter=0.0, occlusions=0),
    )
    assert np.array_equal(clean, note)


def test_capture_deterministic():
    note, _ = generate_note(SubstrateModel(seed=6))
    a = capture(note, CaptureModel(seed=10))
    b = capture(note, CaptureModel(seed=10))
    assert np.array_equal(a, b)
    c = capture(note, CaptureModel(seed=11))
    assert not np.array_equal(a, c)


def test_default_capture_close_to_ground_truth():
    note, layout = generate_note(SubstrateModel(seed=7))
    truth = extract(crop_of(note, layout), GaborParams())
    cap = capture(note, CaptureModel(seed=12))
    assert hamming(truth, note_fingerprint(cap)) <= 0.1


def test_heavy_scribbling_bounded():
    note, _ = generate_note(SubstrateModel(seed=8))
    clean_fp = note_fingerprint(capture(note, CaptureModel(seed=13)))
    scribbled = capture(note, CaptureModel(seed=14, occlusions=20))
    hd = hamming(clean_fp, note_fingerprint(scribbled))
    assert 0.0 < hd <= 0.25


def test_capture_model_validation():
    with pytest.raises(ValueError):
        CaptureModel(seed=1, rotation=12.0)
    with pytest.raises(ValueError):
        CaptureModel(seed=1, noise_sigma=-0.1)
    with pytest.raises(ValueError):
        SubstrateModel(seed=1, thickness_contrast=1.5)
    with pytest.raises(ValueError):
        SubstrateModel(seed=1, impurity_radius_range=(3, 2))


def test_rotated_condition_draws_bounded_angles():
    note, _ = generate_note(SubstrateModel(seed=20))
    for t in (1, 2, 3):
        img = make_sample(20, 1, t, condition="rotated", note_img=note)
        assert img.shape == note.shape


def test_generate_dataset_layout_and_determinism(tmp_path):
    rows = generate_dataset(tmp_path / "d1", notes=2, samples=2, master_seed=99)
    assert len(rows) == 4
    manifest = load_manifest(tmp_path / "d1" / "manifest.jsonl")
    assert len(manifest) == 4
    assert {r.note_id for r in manifest} == {"001", "002"}
    assert all((tmp_path / "d1" / r.path).exists() for r in manifest)

    generate_dataset(tmp_path / "d2", notes=2, samples=2, master_seed=99)
    for row in manifest:
        a = (tmp_path / "d1" / row.path).read_bytes()
        b = (tmp_path / "d2" / row.path).read_bytes()
        assert a == b
    m1 = (tmp_path / "d1" / "manifest.jsonl").read_bytes()
    m2 = (tmp_path / "d2" / "manifest.jsonl").read_bytes()
    assert m1 == m2


def test_generate_dataset_single_file(tmp_path):
    rows = generate_dataset(tmp_path / "one", notes=1, samples=1, master_seed=5)
    assert len(rows) == 1
    img = load_pgm(tmp_path / "one" / rows[0].path)
    assert img.shape == (900, 900)


def test_manifest_fields(tmp_path):
    generate_dataset(tmp_path / "m", notes=1, samples=2, condition="soaked", master_seed=3)
    with open(tmp_path / "m" / "manifest.jsonl") as fh:
        obj = json.loads(fh.readline())
    assert set(obj) == {"note_id", "sample_id", "path", "condition", "seed"}
    assert obj["condition"] == "soaked"
    assert len(obj["seed"]) == 16
    assert obj["seed"] == f"{child_seed(3, 1, 1):016x}"


def test_child_seed_distinct():
    seeds = {child_seed(0, s, t) for s in range(5) for t in range(5)}
    assert len(seeds) == 25
    assert child_seed(0, 1, 2) != child_seed(1, 1, 2)
