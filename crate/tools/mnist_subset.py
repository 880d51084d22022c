#!/usr/bin/env python3
"""Build a small MNIST subset in IDX format from the 5000-image CSV shipped in
the `mlxtend` wheel (500 images per digit, raw 0..255 pixels).

Usage: python3 tools/mnist_subset.py [OUT_DIR]

Writes gzipped IDX files: a 4000-image training split and a 1000-image test
split, stratified (400 / 100 per class) with a fixed shuffle.
"""
import gzip
import io
import os
import struct
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def load_csv():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend==0.24.0"]
        )
        wheel = next(f for f in os.listdir(tmp) if f.endswith(".whl"))
        raw = zipfile.ZipFile(os.path.join(tmp, wheel)).read(CSV_MEMBER)
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",", dtype=np.int64)
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def write_idx(path, array, magic):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", s) for s in array.shape)
    # mtime=0 keeps the archives byte-stable across rebuilds.
    with open(path, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
        gz.write(header + array.tobytes())


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "mnist-5k")
    os.makedirs(out, exist_ok=True)
    images, labels = load_csv()
    rng = np.random.default_rng(20190101)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = rng.permutation(np.flatnonzero(labels == c))
        train_idx.extend(idx[:400])
        test_idx.extend(idx[400:])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)
    for name, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx(os.path.join(out, f"{name}-images-idx3-ubyte.gz"), images[idx].reshape(-1, 28, 28), 0x00000803)
        write_idx(os.path.join(out, f"{name}-labels-idx1-ubyte.gz"), labels[idx], 0x00000801)
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {out}")


if __name__ == "__main__":
    main()
