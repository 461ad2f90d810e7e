import math
import os
from pathlib import Path
import struct

import numpy as np
import pytest

from models import EOActivationConfig, HardwareParams


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long training tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def activation():
    return EOActivationConfig(alpha=0.1, g_phi=0.8 * math.pi, phi_b=0.85 * math.pi)


@pytest.fixture
def hardware():
    return HardwareParams()


@pytest.fixture
def mnist_dir():
    """Directory with the four MNIST IDX files, taken from ONN_MNIST_DIR."""
    path = os.environ.get("ONN_MNIST_DIR")
    if not path:
        pytest.skip("ONN_MNIST_DIR is not set")
    return Path(path)


def random_field(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def write_idx_images(path, images, magic=0x803, opener=open):
    count, rows, cols = images.shape
    with opener(path, "wb") as f:
        f.write(struct.pack(">IIII", magic, count, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels, magic=0x801, opener=open):
    with opener(path, "wb") as f:
        f.write(struct.pack(">II", magic, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())
