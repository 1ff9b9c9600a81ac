#!/usr/bin/env python3
"""Write IDX files from the 10k-digit subset shipped in the npm `mnist` package.

Usage: scripts/mnist_from_npm.py PACKAGE_DIR OUT_DIR

PACKAGE_DIR is the unpacked tarball (`npm pack mnist && tar xzf mnist-*.tgz`),
i.e. the directory containing src/digits/0.json .. 9.json. Pixels there are
stored as value/255 rounded to three decimals; multiplying back by 255 and
rounding recovers the original bytes. Samples are interleaved with a fixed
permutation so the file order does not group digits.
"""
import json
import random
import struct
import sys
from pathlib import Path


def main():
    pkg, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    images, labels = [], []
    for digit in range(10):
        data = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for i in range(len(data) // 784):
            px = data[i * 784:(i + 1) * 784]
            images.append(bytes(min(255, max(0, round(v * 255))) for v in px))
            labels.append(digit)
    order = list(range(len(images)))
    random.Random(20190601).shuffle(order)
    n = len(order)
    with open(out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for i in order:
            f.write(images[i])
    with open(out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(labels[i] for i in order))
    print(f"wrote {n} samples to {out}")


if __name__ == "__main__":
    main()
