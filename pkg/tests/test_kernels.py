import os
import subprocess
import sys

import numpy as np
import pytest

from polymerfp import kernels
from polymerfp.gabor import GaborParams, build_kernel


def test_backends_agree_on_correlation():
    if kernels.active_backend() != "numba":
        pytest.skip("numba backend not active")
    rng = np.random.default_rng(1)
    img = rng.uniform(0, 1, size=(200, 200))
    kernel = build_kernel(GaborParams())
    kflip = np.conj(kernel)[::-1, ::-1]
    kre = np.ascontiguousarray(kflip.real)
    kim = np.ascontiguousarray(kflip.imag)
    grid = np.arange(50, 150, 20, dtype=np.int64)
    out_re = np.empty((grid.size, grid.size))
    out_im = np.empty_like(out_re)
    kernels._correlate_jit(img, kre, kim, grid, grid, out_re, out_im)
    np_re, np_im = kernels._correlate_numpy(img, kre, kim, grid, grid)
    scale = max(np.abs(np_re).max(), np.abs(np_im).max())
    assert np.max(np.abs(out_re - np_re)) <= 1e-9 * scale
    assert np.max(np.abs(out_im - np_im)) <= 1e-9 * scale


def test_backends_agree_on_rotation():
    if kernels.active_backend() != "numba":
        pytest.skip("numba backend not active")
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, size=(120, 90))
    out = np.empty_like(img)
    cos_a, sin_a = np.cos(0.1), np.sin(0.1)
    kernels._rotate_jit(img, cos_a, sin_a, 1.0, out)
    ref = kernels._rotate_numpy(img, cos_a, sin_a, 1.0)
    assert np.max(np.abs(out - ref)) <= 1e-12


def test_correlate_rejects_out_of_bounds_grid():
    img = np.zeros((120, 120))
    kernel = build_kernel(GaborParams())
    with pytest.raises(ValueError, match="exits the image"):
        kernels.correlate_at_points(img, kernel, np.array([10]), np.array([60]))


def test_env_flag_selects_backend():
    code = "from polymerfp import kernels; print(kernels.active_backend())"
    for choice in ("numpy", "numba"):
        env = dict(os.environ, **{kernels.BACKEND_ENV: choice})
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == choice


def test_env_flag_rejects_unknown_backend():
    code = "import polymerfp.kernels"
    env = dict(os.environ, **{kernels.BACKEND_ENV: "cuda"})
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode != 0
    assert "POLYMERFP_BACKEND" in out.stderr


def test_numpy_backend_extraction_matches_active():
    # the fingerprint must not depend on the backend for a clearly
    # non-degenerate image (no response component near zero)
    code = (
        "import numpy as np\n"
        "from polymerfp.synth import SubstrateModel, generate_note\n"
        "from polymerfp.gabor import GaborParams, extract\n"
        "note, lay = generate_note(SubstrateModel(seed=31))\n"
        "ox = lay.marker1[0] + lay.feature_offset[0]\n"
        "oy = lay.marker1[1] + lay.feature_offset[1]\n"
        "crop = note[oy:oy+lay.feature_size, ox:ox+lay.feature_size]\n"
        "print(extract(crop, GaborParams()).to_hex())\n"
    )
    results = {}
    for choice in ("numpy", "numba"):
        env = dict(os.environ, **{kernels.BACKEND_ENV: choice})
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0, out.stderr
        results[choice] = out.stdout.strip()
    assert results["numpy"] == results["numba"]
