#!/usr/bin/env python3
"""Convert a CSV dump of MNIST (784 pixel columns + label column) to gzipped IDX files.

Rows are written with classes interleaved round-robin.

The 5,000-image CSV shipped with mlxtend (mlxtend/data/data/mnist_5k.csv.gz) is the
expected input; it is used for the desk-scale runs when the full dataset is not available.

    python3 tools/make_mnist_subset.py mnist_5k.csv.gz data/mnist
"""

import argparse
import gzip
import os
import struct


def read_rows(path):
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt") as f:
        for line in f:
            line = line.strip()
            if line:
                vals = [int(float(v)) for v in line.split(",")]
                yield vals[:-1], vals[-1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("out_dir")
    args = ap.parse_args()

    images, labels = [], []
    for pixels, label in read_rows(args.csv):
        if len(pixels) != 784:
            raise SystemExit(f"expected 784 pixels per row, got {len(pixels)}")
        images.append(bytes(pixels))
        labels.append(label)

    # The CSV is sorted by label; interleave classes round-robin so that every
    # prefix of the IDX file (e.g. the first 1,000 rows) is class-balanced.
    by_label = {}
    for img, label in zip(images, labels):
        by_label.setdefault(label, []).append(img)
    images, labels = [], []
    queues = [by_label[k] for k in sorted(by_label)]
    keys = sorted(by_label)
    depth = max(len(q) for q in queues)
    for i in range(depth):
        for k, q in zip(keys, queues):
            if i < len(q):
                images.append(q[i])
                labels.append(k)

    os.makedirs(args.out_dir, exist_ok=True)
    n = len(images)
    img_path = os.path.join(args.out_dir, "train-images-idx3-ubyte.gz")
    lbl_path = os.path.join(args.out_dir, "train-labels-idx1-ubyte.gz")
    # mtime=0 keeps the output byte-stable across runs
    with open(img_path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">BBBBIII", 0, 0, 0x08, 3, n, 28, 28))
        for img in images:
            f.write(img)
    with open(lbl_path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">BBBBI", 0, 0, 0x08, 1, n))
        f.write(bytes(labels))
    print(f"wrote {n} images to {img_path} and {lbl_path}")


if __name__ == "__main__":
    main()
