import gzip
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import pytest

# the run registry is created on server import; keep it out of the source tree
os.environ.setdefault("NNXP_DATA_DIR", tempfile.mkdtemp(prefix="nnxp-tests-"))

from servers.nnxp.connectome import init_connectome  # noqa: E402
from servers.nnxp.dataio import Dataset  # noqa: E402

IMAGE_SIDE = 4
INPUT_SIZE = IMAGE_SIDE * IMAGE_SIDE


def make_dataset(n: int, seed: int = 0, input_size: int = INPUT_SIZE, name: str = "synthetic") -> Dataset:
    """Ten noisy class prototypes; learnable by a small network."""
    rng = np.random.default_rng(seed)
    prototypes = np.random.default_rng(1234).integers(0, 256, size=(10, input_size))
    labels = rng.integers(0, 10, size=n)
    noise = rng.integers(-30, 31, size=(n, input_size))
    pixels = np.clip(prototypes[labels] + noise, 0, 255)
    return Dataset(name, pixels, labels)


def stroke_templates(seed: int, side: int = 28, strokes: int = 3, thickness: int = 3) -> np.ndarray:
    """One binary image per class, each made of a few thick straight strokes."""
    rng = np.random.default_rng(seed)
    templates = np.zeros((10, side, side))
    steps = np.linspace(0.0, 1.0, 30)
    for image in templates:
        for _ in range(strokes):
            x0, y0, x1, y1 = rng.uniform(4, side - 4, size=4)
            xs = np.rint(x0 + (x1 - x0) * steps).astype(int)
            ys = np.rint(y0 + (y1 - y0) * steps).astype(int)
            for dx in range(thickness):
                for dy in range(thickness):
                    image[np.minimum(ys + dy, side - 1), np.minimum(xs + dx, side - 1)] = 1.0
    return templates.reshape(10, side * side)


def make_stroke_dataset(
    n: int, seed: int, templates: np.ndarray, drop: float = 0.05, salt: float = 0.01, name: str = "strokes"
) -> Dataset:
    """MNIST-shaped stand-in: faded stroke templates with dropped and salted pixels."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    ink = templates[labels] * (rng.uniform(size=(n, templates.shape[1])) >= drop)
    pixels = np.floor(ink * rng.uniform(0.6, 1.0, size=(n, 1)) * 255)
    salted = rng.uniform(size=pixels.shape) < salt
    pixels[salted] = rng.integers(0, 256, size=int(salted.sum()))
    return Dataset(name, pixels, labels)


def write_idx_pair(images_path: Path, labels_path: Path, dataset: Dataset, side: int = IMAGE_SIDE) -> None:
    count = len(dataset)
    images = struct.pack(">IIII", 0x00000803, count, side, side) + dataset.pixels.astype(np.uint8).tobytes()
    labels = struct.pack(">II", 0x00000801, count) + dataset.labels.astype(np.uint8).tobytes()
    for path, data in ((images_path, images), (labels_path, labels)):
        if path.suffix == ".gz":
            data = gzip.compress(data)
        path.write_bytes(data)


def write_mnist_dir(directory: Path, train_set: Dataset, test_set: Dataset, gz: bool = False) -> Path:
    suffix = ".gz" if gz else ""
    write_idx_pair(
        directory / f"train-images-idx3-ubyte{suffix}",
        directory / f"train-labels-idx1-ubyte{suffix}",
        train_set,
    )
    write_idx_pair(
        directory / f"t10k-images-idx3-ubyte{suffix}",
        directory / f"t10k-labels-idx1-ubyte{suffix}",
        test_set,
    )
    return directory


@pytest.fixture
def train_set() -> Dataset:
    return make_dataset(400, seed=1, name="train")


@pytest.fixture
def test_set() -> Dataset:
    return make_dataset(100, seed=2, name="test")


@pytest.fixture
def small_net():
    return init_connectome((INPUT_SIZE, 8, 10), 0.5, 7)


@pytest.fixture
def mnist_dir(tmp_path, train_set, test_set) -> Path:
    directory = tmp_path / "mnist"
    directory.mkdir()
    return write_mnist_dir(directory, train_set, test_set)


@pytest.fixture
def registry(tmp_path, monkeypatch):
    from servers.nnxp.run_db import init_run_db

    monkeypatch.setenv("NNXP_DATA_DIR", str(tmp_path / "registry"))
    init_run_db()
    return tmp_path / "registry"
