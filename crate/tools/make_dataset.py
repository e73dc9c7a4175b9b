#!/usr/bin/env python3
"""Build the bundled MNIST subset in IDX format.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist), which
ships 10,000 genuine MNIST digits as JSON (one file per class, pixel values
stored as byte/255 rounded to three decimals, which is byte-exact
recoverable).  To refetch the source data:

    npm pack mnist && tar xf mnist-*.tgz   # extracts to ./package/

This script reconstructs the raw bytes, draws a seeded stratified split of
200 test samples per class (2000 total; the remaining 8000 are training
data), and writes the four gzipped IDX files used by the experiment harness
and the acceptance tests.

Usage: python3 tools/make_dataset.py <package/src/digits dir> <output dir>
"""

import gzip
import hashlib
import json
import struct
import sys
from pathlib import Path

import numpy as np

SEED = 42
TEST_PER_CLASS = 200
SIDE = 28


def load_class(digits_dir: Path, digit: int) -> np.ndarray:
    """Return an (n, 784) uint8 array for one digit class."""
    raw = json.loads((digits_dir / f"{digit}.json").read_text())
    flat = np.asarray(raw["data"], dtype=np.float64)
    if flat.size % (SIDE * SIDE) != 0:
        raise SystemExit(f"class {digit}: size {flat.size} not a multiple of 784")
    imgs = flat.reshape(-1, SIDE * SIDE)
    bytes_ = np.rint(imgs * 255.0)
    # The JSON stores round(byte/255, 3); reconstruction must be exact.
    err = np.abs(imgs - bytes_ / 255.0).max()
    if err > 0.0005 + 1e-12:
        raise SystemExit(f"class {digit}: reconstruction error {err} too large")
    return bytes_.astype(np.uint8)


def write_gz(path: Path, payload: bytes) -> None:
    # mtime=0 keeps the output byte-stable across regenerations.
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", compresslevel=9, mtime=0) as f:
            f.write(payload)


def write_idx_images(path: Path, images: np.ndarray) -> None:
    header = struct.pack(">IIII", 0x00000803, images.shape[0], SIDE, SIDE)
    write_gz(path, header + images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    header = struct.pack(">II", 0x00000801, labels.shape[0])
    write_gz(path, header + labels.astype(np.uint8).tobytes())


def main() -> None:
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    digits_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.RandomState(SEED)
    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        imgs = load_class(digits_dir, digit)
        order = rng.permutation(len(imgs))
        test_idx, train_idx = order[:TEST_PER_CLASS], order[TEST_PER_CLASS:]
        test_x.append(imgs[test_idx])
        test_y.append(np.full(len(test_idx), digit, dtype=np.uint8))
        train_x.append(imgs[train_idx])
        train_y.append(np.full(len(train_idx), digit, dtype=np.uint8))
        print(f"class {digit}: {len(imgs)} total -> {len(train_idx)} train, {len(test_idx)} test")

    def shuffled(xs, ys):
        x, y = np.concatenate(xs), np.concatenate(ys)
        order = rng.permutation(len(x))
        return x[order], y[order]

    train_x, train_y = shuffled(train_x, train_y)
    test_x, test_y = shuffled(test_x, test_y)

    files = {
        "train-images-idx3-ubyte.gz": (write_idx_images, train_x),
        "train-labels-idx1-ubyte.gz": (write_idx_labels, train_y),
        "test-images-idx3-ubyte.gz": (write_idx_images, test_x),
        "test-labels-idx1-ubyte.gz": (write_idx_labels, test_y),
    }
    for name, (writer, arr) in files.items():
        path = out_dir / name
        writer(path, arr)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
        print(f"{name}: {arr.shape[0]} samples, sha256 {digest}")


if __name__ == "__main__":
    main()
