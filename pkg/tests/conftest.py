import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))  # make tests/oracles.py importable

from radfuse.synth import make_dataset, write_standin_deep_features


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_u8(rng, shape):
    return rng.integers(0, 256, size=shape).astype(np.uint8)


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory):
    """Small 3-class synthetic dataset: 4 images per class plus manifest."""
    root = tmp_path_factory.mktemp("toy")
    manifest = make_dataset(root / "data", n_per_class=4, seed=99)
    return {"root": root / "data", "manifest": manifest}


@pytest.fixture(scope="session")
def toy_deep_file(tmp_path_factory, toy_data):
    """Stand-in deep feature RFF1 aligned with the toy dataset."""
    path = tmp_path_factory.mktemp("deep") / "deep.rff1"
    write_standin_deep_features(toy_data["manifest"], path, seed=5)
    return path


def save_png(path, array):
    Image.fromarray(array).save(path)
    return path
