#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Build a small Fashion-MNIST IDX subset from the per-class JSON files of
the `fashion-mnist` npm package (src/clothes/<class>.json).

Takes the first PER_CLASS images of every class and writes them interleaved
by class (0,1,...,9,0,1,...) as IDX image/label files.
"""
import json
import struct
import sys
from pathlib import Path

PER_CLASS = 10


def main(src_dir, out_dir):
    src, out = Path(src_dir), Path(out_dir)
    classes = [json.loads((src / f"{c}.json").read_text())["data"][:PER_CLASS] for c in range(10)]
    images, labels = [], []
    for k in range(PER_CLASS):
        for c in range(10):
            px = classes[c][k]
            assert len(px) == 784 and all(0 <= v <= 255 for v in px)
            images.append(bytes(px))
            labels.append(c)
    n = len(images)
    (out / "fashion-subset-images-idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x803, n, 28, 28) + b"".join(images))
    (out / "fashion-subset-labels-idx1-ubyte").write_bytes(
        struct.pack(">II", 0x801, n) + bytes(labels))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
