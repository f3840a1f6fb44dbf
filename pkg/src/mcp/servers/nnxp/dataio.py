"""MNIST ingestion (IDX and CSV), one-hot targets and the dataset container."""

from __future__ import annotations

import csv
import gzip
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
GZIP_SIGNATURE = b"\x1f\x8b"

CLASSES = 10
PIXEL_MAX = 255
CSV_FIELDS = 785

IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CSV_FILES = {"train": "mnist_train.csv", "test": "mnist_test.csv"}


def one_hot(label: int, classes: int = CLASSES) -> np.ndarray:
    if not 0 <= label < classes:
        raise DataFormatError(f"label {label} outside [0, {classes})")
    target = np.zeros(classes, dtype=np.float64)
    target[label] = 1.0
    return target


@dataclass(frozen=True, eq=False)
class Example:
    pixels: np.ndarray = field(repr=False)
    label: int
    target: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    """Examples stored as flat arrays: one pixel row, label and one-hot row per example."""

    name: str
    pixels: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        pixels = np.array(self.pixels, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64).ravel()
        if pixels.ndim != 2:
            raise DataFormatError(f"pixels must be a 2-d array, got shape {pixels.shape}")
        if pixels.shape[0] != labels.size:
            raise DataFormatError("image/label count mismatch")
        if labels.size and (labels.min() < 0 or labels.max() >= CLASSES):
            raise DataFormatError(f"labels must lie in [0, {CLASSES})")
        if pixels.size and (pixels.min() < 0 or pixels.max() > PIXEL_MAX):
            raise DataFormatError(f"pixel values must lie in [0, {PIXEL_MAX}]")
        targets = np.zeros((labels.size, CLASSES), dtype=np.float64)
        targets[np.arange(labels.size), labels] = 1.0
        for array in (pixels, labels, targets):
            array.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_targets", targets)

    @property
    def targets(self) -> np.ndarray:
        return self._targets

    @property
    def input_size(self) -> int:
        return self.pixels.shape[1]

    def __len__(self) -> int:
        return int(self.labels.size)

    def __getitem__(self, index: int) -> Example:
        return Example(self.pixels[index], int(self.labels[index]), self.targets[index])

    @property
    def examples(self) -> list[Example]:
        return [self[i] for i in range(len(self))]

    def head(self, n: int) -> Dataset:
        return Dataset(f"{self.name}[:{n}]", self.pixels[:n], self.labels[:n])

    def subset(self, indices) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(f"{self.name}[subset]", self.pixels[idx], self.labels[idx])

    def same_data(self, other: Dataset) -> bool:
        return np.array_equal(self.pixels, other.pixels) and np.array_equal(self.labels, other.labels)


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------
def _read_maybe_gzip(path: str | Path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == GZIP_SIGNATURE:
        try:
            return gzip.decompress(raw)
        except (EOFError, OSError) as exc:
            raise DataFormatError(f"unexpected end of data in {path}: {exc}") from exc
    return raw


def _idx_header(data: bytes, magic: int, dims: int, path: str | Path) -> tuple[int, ...]:
    # header: big-endian magic followed by one u32 per dimension
    header_size = 4 * (1 + dims)
    if len(data) < 4:
        raise DataFormatError(f"unexpected end of data in {path}")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise DataFormatError(f"not an IDX file: {path} (magic 0x{found:08x})")
    if len(data) < header_size:
        raise DataFormatError(f"unexpected end of data in {path}")
    return struct.unpack(f">{dims}I", data[4:header_size])


def load_idx(images_path: str | Path, labels_path: str | Path, name: str | None = None) -> Dataset:
    images = _read_maybe_gzip(images_path)
    labels = _read_maybe_gzip(labels_path)
    count, rows, cols = _idx_header(images, IDX_IMAGES_MAGIC, 3, images_path)
    (label_count,) = _idx_header(labels, IDX_LABELS_MAGIC, 1, labels_path)
    if count != label_count:
        raise DataFormatError(f"image/label count mismatch ({count} images, {label_count} labels)")

    pixel_bytes = count * rows * cols
    if len(images) < 16 + pixel_bytes:
        raise DataFormatError(f"unexpected end of data in {images_path}")
    if len(labels) < 8 + count:
        raise DataFormatError(f"unexpected end of data in {labels_path}")

    pixels = np.frombuffer(images, dtype=np.uint8, count=pixel_bytes, offset=16).reshape(count, rows * cols)
    label_values = np.frombuffer(labels, dtype=np.uint8, count=count, offset=8)
    dataset = Dataset(name or Path(images_path).name, pixels, label_values)
    log.info("loaded %d examples from %s", len(dataset), images_path)
    return dataset


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------
def _csv_row(fields: list[str], line_number: int) -> np.ndarray:
    if len(fields) != CSV_FIELDS:
        raise DataFormatError(f"expected {CSV_FIELDS} fields at line {line_number}, got {len(fields)}")
    try:
        values = np.array(fields, dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError(f"non-integer value at line {line_number}: {exc}") from exc
    if not 0 <= values[0] < CLASSES:
        raise DataFormatError(f"label {values[0]} out of range at line {line_number}")
    if values[1:].min() < 0 or values[1:].max() > PIXEL_MAX:
        raise DataFormatError(f"pixel value out of range at line {line_number}")
    return values.astype(np.uint8)


def load_csv(path: str | Path, name: str | None = None) -> Dataset:
    """One example per line: ``label,p0,...,p783``; no header."""
    rows: list[np.ndarray] = []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        for line_number, fields in enumerate(csv.reader(handle), start=1):
            if fields:
                rows.append(_csv_row(fields, line_number))
    if not rows:
        raise DataFormatError("empty dataset")

    table = np.vstack(rows)
    dataset = Dataset(name or Path(path).name, table[:, 1:], table[:, 0])
    log.info("loaded %d examples from %s", len(dataset), path)
    return dataset


def write_csv(dataset: Dataset, path: str | Path) -> Path:
    """Write ``dataset`` in the line format ``load_csv`` reads."""
    out_path = Path(path)
    with out_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for label, pixels in zip(dataset.labels, dataset.pixels):
            writer.writerow([int(label), *(int(p) for p in pixels)])
    return out_path


# ---------------------------------------------------------------------------
# data directory discovery
# ---------------------------------------------------------------------------
def _find(data_dir: Path, base: str) -> Path:
    for candidate in (data_dir / base, data_dir / f"{base}.gz"):
        if candidate.exists():
            return candidate
    raise DataFormatError(f"missing {base}[.gz] in {data_dir}")


def load_split(data_dir: str | Path, split: str, fmt: str = "idx") -> Dataset:
    directory = Path(data_dir)
    if split not in IDX_FILES:
        raise DataFormatError(f"unknown split '{split}' (expected train or test)")
    if fmt == "idx":
        images, labels = IDX_FILES[split]
        return load_idx(_find(directory, images), _find(directory, labels), name=split)
    if fmt == "csv":
        return load_csv(_find(directory, CSV_FILES[split]), name=split)
    raise DataFormatError(f"unknown data format '{fmt}' (expected idx or csv)")


def load_mnist(data_dir: str | Path, fmt: str = "idx") -> tuple[Dataset, Dataset]:
    return load_split(data_dir, "train", fmt), load_split(data_dir, "test", fmt)
