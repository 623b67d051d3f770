#!/usr/bin/env python3
"""Build the MNIST subset shipped in crates/core/data/mnist.

Source: the `mnist` npm package (MIT, https://github.com/cazala/mnist), which
bundles 10 000 MNIST digits as per-class JSON arrays of pixel/255 floats.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_subset.py package/src/digits crates/core/data/mnist

Writes gzip-compressed IDX files (big-endian magic 0x00000803 / 0x00000801).
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 500
TEST_PER_CLASS = 100


def load_class(digits_dir, label):
    data = json.loads((Path(digits_dir) / f"{label}.json").read_text())["data"]
    n = len(data) // 784
    return [
        bytes(int(round(v * 255)) for v in data[i * 784:(i + 1) * 784])
        for i in range(n)
    ]


def write_idx(path, images, labels):
    with gzip.GzipFile(path + "-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with gzip.GzipFile(path + "-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main(digits_dir, out_dir):
    train, test = [], []
    for label in range(10):
        samples = load_class(digits_dir, label)
        test += [(s, label) for s in samples[:TEST_PER_CLASS]]
        train += [(s, label) for s in samples[TEST_PER_CLASS:TEST_PER_CLASS + TRAIN_PER_CLASS]]
    rng = random.Random(20240601)
    rng.shuffle(train)
    rng.shuffle(test)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(str(out / "train"), [s for s, _ in train], [l for _, l in train])
    write_idx(str(out / "t10k"), [s for s, _ in test], [l for _, l in test])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
