#!/usr/bin/env python3
# Copyright 2026 The memdef Authors
# SPDX-License-Identifier: Apache-2.0
"""Build Fashion-MNIST IDX files from the per-class JSON in the npm package.

    npm pack fashion-mnist && tar xzf fashion-mnist-*.tgz
    tools/fmnist_from_npm.py package/src/clothes data/fashion-mnist

Per class the first --train-per-class images go to the train split and the
following --test-per-class images to the test split. Classes are interleaved
round-robin so every prefix of a split is class balanced. Empty entries in
the package are skipped.
"""

import argparse
import gzip
import json
import pathlib
import struct


def write_idx(path, images, labels):
    def opener(p, mode):
        return gzip.GzipFile(p, mode, mtime=0) if p.suffix == ".gz" else open(p, mode)

    with opener(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    label_path = path.with_name(path.name.replace("images-idx3", "labels-idx1"))
    with opener(label_path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def interleave(per_class):
    images, labels = [], []
    for i in range(max(len(v) for v in per_class)):
        for cls, rows in enumerate(per_class):
            if i < len(rows):
                images.append(rows[i])
                labels.append(cls)
    return images, labels


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("clothes_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train-per-class", type=int, default=6000)
    ap.add_argument("--test-per-class", type=int, default=1000)
    ap.add_argument("--gzip", action="store_true", help="write .gz files")
    args = ap.parse_args()

    train, test = [], []
    for cls in range(10):
        rows = json.loads((args.clothes_dir / f"{cls}.json").read_text())["data"]
        rows = [r for r in rows if r]  # the package carries a few empty entries
        need = args.train_per_class + args.test_per_class
        if len(rows) < need:
            raise SystemExit(f"class {cls} has {len(rows)} images, need {need}")
        for r in rows[:need]:
            if len(r) != 784 or not all(0 <= v <= 255 for v in r):
                raise SystemExit(f"class {cls}: malformed image")
        train.append(rows[: args.train_per_class])
        test.append(rows[args.train_per_class : need])

    args.out_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".gz" if args.gzip else ""
    for name, split in (("train", train), ("t10k", test)):
        images, labels = interleave(split)
        write_idx(args.out_dir / f"{name}-images-idx3-ubyte{suffix}", images, labels)
        print(f"{name}: {len(images)} images")


if __name__ == "__main__":
    main()
