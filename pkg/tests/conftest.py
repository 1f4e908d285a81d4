import numpy as np
import pytest

from polymerfp.fingerprint import FINGERPRINT_BITS, Fingerprint
from polymerfp.synth import SubstrateModel, generate_note


def random_fingerprint(rng) -> Fingerprint:
    return Fingerprint(rng.integers(0, 2, size=FINGERPRINT_BITS).astype(bool))


def marker_image(height=650, width=100, centers=((30, 30), (30, 600)), half=2, background=1.0):
    """White canvas with square black blobs at the given (x, y) centres."""
    img = np.full((height, width), background)
    for x, y in centers:
        img[y - half : y + half + 1, x - half : x + half + 1] = 0.0
    return img


@pytest.fixture(scope="session")
def note_and_layout():
    return generate_note(SubstrateModel(seed=777))
