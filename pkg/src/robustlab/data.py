"""Datasets: IDX (MNIST) parsing, desk-scale subsets, batching, CSV export."""

from __future__ import annotations

import csv
import gzip
import os
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np

IMAGES_MAGIC = 0x00000803
FLAT_IMAGES_MAGIC = 0x00000802
LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be an (n, d) matrix")
        if len(self.labels) != len(self.inputs):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], dict(self.meta))


def _open(path: Path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def _read_idx(path, expected_magic) -> np.ndarray:
    path = Path(path)
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise IdxError(f"{path}: truncated header")
    magic = struct.unpack(">I", raw[:4])[0]
    allowed = expected_magic if isinstance(expected_magic, tuple) else (expected_magic,)
    if magic not in allowed:
        want = " or ".join(f"0x{m:08x}" for m in allowed)
        raise IdxError(f"{path}: bad magic 0x{magic:08x} (expected {want})")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise IdxError(f"{path}: truncated file, expected {count} bytes of data, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label pair (plain or gzipped); pixels are scaled to [0, 1]."""
    images = _read_idx(images_path, (IMAGES_MAGIC, FLAT_IMAGES_MAGIC))
    labels = _read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxError(f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels")
    n = images.shape[0]
    return Dataset(images.reshape(n, -1) / 255.0, labels.astype(np.int64),
                   {"source": str(images_path), "scaling": "u8/255", "image_shape": list(images.shape[1:])})


def write_idx(ds: Dataset, images_path, labels_path, image_shape=None, compress: bool = False):
    """Write a dataset with inputs in [0, 1] back to IDX (pixels rounded to u8)."""
    n, d = ds.inputs.shape
    if image_shape is None:
        side = int(round(np.sqrt(d)))
        image_shape = (side, side) if side * side == d else (d,)
    pixels = np.clip(np.rint(ds.inputs * 255.0), 0, 255).astype(np.uint8)
    img_hdr = struct.pack(">I", 0x00000800 | (1 + len(image_shape))) + struct.pack(f">{1 + len(image_shape)}I", n, *image_shape)
    lab_hdr = struct.pack(">II", LABELS_MAGIC, n)
    opener = gzip.open if compress else open
    with opener(images_path, "wb") as fh:
        fh.write(img_hdr + pixels.tobytes())
    with opener(labels_path, "wb") as fh:
        fh.write(lab_hdr + ds.labels.astype(np.uint8).tobytes())


def subset(ds: Dataset, n: int, seed: int) -> Dataset:
    if n > len(ds):
        raise ValueError(f"requested {n} examples from a dataset of {len(ds)}")
    idx = np.sort(np.random.default_rng(seed).permutation(len(ds))[:n])
    return ds.take(idx)


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def batches(ds: Dataset, batch_size: int, seed: int, epoch: int) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (indices, inputs, labels); the last batch is kept even when short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = epoch_order(len(ds), seed, epoch)
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield idx, ds.inputs[idx], ds.labels[idx]


def to_csv(ds: Dataset, path):
    """One example per line, label in the last column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(ds.dim)] + ["label"])
        for row, y in zip(ds.inputs, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(y)])


def from_csv(path) -> Dataset:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(arr[:, :-1], arr[:, -1].astype(np.int64), {"source": str(path)})


# --- MNIST discovery --------------------------------------------------------

_FULL_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(directory: Path, stem: str) -> Path | None:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        if (directory / name).exists():
            return directory / name
    return None


def bundled_sample() -> Dataset:
    """5000 MNIST training digits (500 per class) shipped with the package."""
    base = resources.files("robustlab") / "_data"
    with resources.as_file(base / "mnist5k-images-idx3-ubyte.gz") as img, \
            resources.as_file(base / "mnist5k-labels-idx1-ubyte.gz") as lab:
        ds = load_idx(img, lab)
    ds.meta["source"] = "bundled-mnist5k"
    return ds


def load_mnist_split(split: str, data_dir=None) -> Dataset | None:
    directory = Path(data_dir or os.environ.get("ROBUSTLAB_DATA", "")) if (data_dir or os.environ.get("ROBUSTLAB_DATA")) else None
    if directory is None:
        return None
    img_stem, lab_stem = _FULL_NAMES[split]
    img, lab = _find(directory, img_stem), _find(directory, lab_stem)
    if img is None or lab is None:
        return None
    return load_idx(img, lab)


def desk_mnist(n_train: int = 2000, n_test: int = 1000, seed: int = 0, data_dir=None) -> tuple[Dataset, Dataset]:
    """Desk-scale MNIST train/test pair.

    Uses full MNIST from ``data_dir`` / $ROBUSTLAB_DATA when present, else a
    disjoint split of the bundled 5k sample.
    """
    train = load_mnist_split("train", data_dir)
    test = load_mnist_split("test", data_dir)
    if train is not None and test is not None:
        return subset(train, n_train, seed), subset(test, n_test, seed + 1)
    sample = bundled_sample()
    if n_train + n_test > len(sample):
        raise ValueError(f"bundled sample has {len(sample)} digits; asked for {n_train}+{n_test}")
    order = np.random.default_rng(seed).permutation(len(sample))
    tr, te = np.sort(order[:n_train]), np.sort(order[n_train:n_train + n_test])
    return sample.take(tr), sample.take(te)
