import gzip
import struct

import numpy as np
import pytest

from robustlab.data import (Dataset, IdxError, batches, bundled_sample, desk_mnist, epoch_order, from_csv, load_idx,
                            subset, to_csv, write_idx)


def raw_idx(tmp_path, n=3, rows=2, cols=2, compress=False):
    """Hand-packed IDX pair; pixel values 0..(n*rows*cols - 1)."""
    pix = np.arange(n * rows * cols, dtype=np.uint8)
    img = struct.pack(">IIII", 0x803, n, rows, cols) + pix.tobytes()
    lab = struct.pack(">II", 0x801, n) + bytes(range(n))
    opener = gzip.open if compress else open
    ip, lp = tmp_path / "img", tmp_path / "lab"
    with opener(ip, "wb") as fh:
        fh.write(img)
    with opener(lp, "wb") as fh:
        fh.write(lab)
    return ip, lp, pix


@pytest.mark.parametrize("compress", [False, True])
def test_load_idx_hand_packed(tmp_path, compress):
    ip, lp, pix = raw_idx(tmp_path, compress=compress)
    ds = load_idx(ip, lp)
    assert ds.inputs.shape == (3, 4)
    np.testing.assert_array_equal(ds.inputs.ravel(), pix / 255.0)
    np.testing.assert_array_equal(ds.labels, [0, 1, 2])


def test_bad_magic(tmp_path):
    ip, lp, _ = raw_idx(tmp_path)
    with pytest.raises(IdxError, match="magic"):
        load_idx(lp, lp)


def test_truncated(tmp_path):
    ip, lp, _ = raw_idx(tmp_path)
    ip.write_bytes(ip.read_bytes()[:-1])
    with pytest.raises(IdxError, match="truncated"):
        load_idx(ip, lp)
    ip.write_bytes(b"\x00\x00")
    with pytest.raises(IdxError, match="truncated"):
        load_idx(ip, lp)


def test_count_mismatch(tmp_path):
    ip, lp, _ = raw_idx(tmp_path)
    lp.write_bytes(struct.pack(">II", 0x801, 2) + b"\x00\x01")
    with pytest.raises(IdxError, match="mismatch"):
        load_idx(ip, lp)


@pytest.mark.parametrize("compress", [False, True])
def test_write_read_round_trip(tmp_path, compress):
    rng = np.random.default_rng(0)
    ds = Dataset(rng.integers(0, 256, size=(5, 16)) / 255.0, rng.integers(0, 10, size=5))
    write_idx(ds, tmp_path / "i", tmp_path / "l", compress=compress)
    back = load_idx(tmp_path / "i", tmp_path / "l")
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_flat_images_round_trip(tmp_path):
    ds = Dataset(np.array([[0.0, 1.0, 0.5 + 0.5 / 255]]), np.array([4]))
    write_idx(ds, tmp_path / "i", tmp_path / "l", image_shape=(3,))
    back = load_idx(tmp_path / "i", tmp_path / "l")
    assert back.inputs.shape == (1, 3)


def test_csv_round_trip(tmp_path):
    ds = Dataset(np.array([[0.1, 0.2], [0.3, 0.4]]), np.array([1, 0]))
    to_csv(ds, tmp_path / "d.csv")
    back = from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_batches_cover_once_and_keep_short_batch(toy_data):
    seen = []
    sizes = []
    for idx, x, y in batches(toy_data, 50, seed=0, epoch=1):
        seen.extend(idx.tolist())
        sizes.append(len(idx))
        np.testing.assert_array_equal(x, toy_data.inputs[idx])
    assert sorted(seen) == list(range(120))
    assert sizes == [50, 50, 20]


def test_epoch_order_changes_with_epoch():
    assert not np.array_equal(epoch_order(100, 0, 1), epoch_order(100, 0, 2))
    np.testing.assert_array_equal(epoch_order(100, 0, 1), epoch_order(100, 0, 1))


def test_subset(toy_data):
    s = subset(toy_data, 10, seed=1)
    assert len(s) == 10
    with pytest.raises(ValueError):
        subset(toy_data, 1000, seed=1)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(2))


def test_bundled_sample():
    ds = bundled_sample()
    assert ds.inputs.shape == (5000, 784)
    assert np.bincount(ds.labels).tolist() == [500] * 10
    assert 0.0 <= ds.inputs.min() and ds.inputs.max() <= 1.0


def test_desk_split_disjoint(monkeypatch):
    monkeypatch.delenv("ROBUSTLAB_DATA", raising=False)
    tr, te = desk_mnist(2000, 1000, seed=0)
    assert len(tr) == 2000 and len(te) == 1000
    a = {r.tobytes() for r in tr.inputs}
    assert sum(r.tobytes() in a for r in te.inputs) < 5  # only genuine duplicate digits could collide
    with pytest.raises(ValueError):
        desk_mnist(4500, 1000)


def test_full_mnist_from_env(tmp_path, monkeypatch):
    rng = np.random.default_rng(0)
    for split, stem in (("train", "train"), ("test", "t10k")):
        ds = Dataset(rng.integers(0, 256, size=(30, 784)) / 255.0, rng.integers(0, 10, size=30))
        write_idx(ds, tmp_path / f"{stem}-images-idx3-ubyte", tmp_path / f"{stem}-labels-idx1-ubyte")
    monkeypatch.setenv("ROBUSTLAB_DATA", str(tmp_path))
    tr, te = desk_mnist(20, 10, seed=0)
    assert len(tr) == 20 and len(te) == 10
