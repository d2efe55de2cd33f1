#!/usr/bin/env python3
"""Build MNIST-layout IDX files from the digits bundled in the npm `mnist` package.

The npm package (https://www.npmjs.com/package/mnist, v1.1.0) ships 10,000
MNIST training digits as JSON arrays of pixel/255 rounded to three decimals.
Rounding back to the nearest integer recovers the original 0..255 bytes.

usage: scripts/mnist_from_npm.py <unpacked npm package dir> <out dir>
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main():
    pkg, out = Path(sys.argv[1]), Path(sys.argv[2])
    samples = []
    for digit in range(10):
        with open(pkg / "src" / "digits" / f"{digit}.json") as fh:
            flat = json.load(fh)["data"]
        assert len(flat) % 784 == 0
        for i in range(len(flat) // 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784])
            samples.append((pixels, digit))
    random.Random(0).shuffle(samples)
    out.mkdir(parents=True, exist_ok=True)
    n = len(samples)
    with gzip.GzipFile(out / "train-images-idx3-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for pixels, _ in samples:
            fh.write(pixels)
    with gzip.GzipFile(out / "train-labels-idx1-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(bytes(label for _, label in samples))
    print(f"wrote {n} images to {out}")


if __name__ == "__main__":
    main()
