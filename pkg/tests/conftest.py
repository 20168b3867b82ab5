from __future__ import annotations

import numpy as np
import pytest
import torch
from skimage import data, transform

from gapsolver.networks import (
    PHASE_CLASSIFIER,
    DiscriminatorArch,
    GapGenerator,
    GeneratorArch,
    ModelCheckpoint,
    PatchDiscriminator,
)
from gapsolver.pieces import slice_image

TINY_GEN = GeneratorArch(widths=(4, 4, 8, 8, 8, 8))
TINY_DISC = DiscriminatorArch(widths=(4, 8, 8))


def _to_float(image: np.ndarray) -> np.ndarray:
    return (image.astype(np.float32) / 255.0).clip(0.0, 1.0)


@pytest.fixture(scope="session", autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture(scope="session")
def astronaut_image() -> np.ndarray:
    """70-piece natural test image: 7x10 grid of 64px pieces."""
    resized = transform.resize(data.astronaut(), (448, 640), anti_aliasing=True)
    return np.ascontiguousarray(resized.astype(np.float32))


@pytest.fixture(scope="session")
def chelsea_image() -> np.ndarray:
    return _to_float(data.chelsea())


@pytest.fixture(scope="session")
def coffee_image() -> np.ndarray:
    return _to_float(data.coffee())


@pytest.fixture(scope="session")
def small_image(chelsea_image) -> np.ndarray:
    """192x256 crop, enough for a 3x4 grid of 64px pieces."""
    return np.ascontiguousarray(chelsea_image[:192, :256])


@pytest.fixture(scope="session")
def small_bundle(small_image):
    return slice_image(small_image, 64)


@pytest.fixture(scope="session")
def tiny_checkpoint() -> ModelCheckpoint:
    """Random-weight classifier checkpoint over narrow networks."""
    torch.manual_seed(1234)
    generator = GapGenerator(TINY_GEN)
    discriminator = PatchDiscriminator(TINY_DISC)
    return ModelCheckpoint.from_models(
        generator,
        discriminator,
        PHASE_CLASSIFIER,
        {"piece_size": 64, "erosion_pct": 0.07, "seed": 1234},
    )
