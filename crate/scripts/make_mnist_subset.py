#!/usr/bin/env python3
"""Build the bundled MNIST subset in standard IDX format.

Source: the `mnist` npm package (github.com/cazala/mnist, MIT), which ships
10,000 MNIST digits as JSON arrays of byte/255 values rounded to 3 decimals.
Rounding is exactly invertible (adjacent byte levels differ by ~0.0039), so
the original bytes are recovered with round(v * 255).

The digits are shuffled with a fixed seed and split 8000/2000 into
train-*/t10k-* files. Usage:

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_mnist_subset.py package/src/digits data/mnist-subset
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

SEED = 20160504
N_TRAIN = 8000


def write_idx(path, array, magic):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in array.shape:
            f.write(struct.pack(">I", d))
        f.write(array.astype(np.uint8).tobytes())


def main(src, dst):
    images, labels = [], []
    for digit in range(10):
        data = json.load(open(Path(src) / f"{digit}.json"))["data"]
        arr = np.asarray(data, dtype=np.float64).reshape(-1, 784)
        bytes_ = np.rint(arr * 255.0)
        assert np.all(np.round(bytes_ / 255.0, 3) == arr)
        images.append(bytes_.astype(np.uint8))
        labels.append(np.full(len(arr), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(SEED).permutation(len(images))
    images, labels = images[order], labels[order]
    dst = Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    write_idx(dst / "train-images-idx3-ubyte.gz", images[:N_TRAIN].reshape(-1, 28, 28), 0x803)
    write_idx(dst / "train-labels-idx1-ubyte.gz", labels[:N_TRAIN], 0x801)
    write_idx(dst / "t10k-images-idx3-ubyte.gz", images[N_TRAIN:].reshape(-1, 28, 28), 0x803)
    write_idx(dst / "t10k-labels-idx1-ubyte.gz", labels[N_TRAIN:], 0x801)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
