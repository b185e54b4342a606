#!/usr/bin/env python3
"""Convert the KEEL copies of the benchmark datasets into LIBSVM text files.

Usage: keel_to_libsvm.py <keel raw dir> <output dir>

The KEEL raw directory is `keel_ds/data/balanced/raw` inside the `keel-ds`
wheel on PyPI. Numeric columns are written unchanged; categorical columns
(mushroom) are one-hot encoded with attribute-major, value-sorted indices.

Each numeric dataset is also written as `<name>_scale.libsvm`, every feature
mapped linearly onto [-1, 1] over the whole file (the `svm-scale -l -1 -u 1`
rule used for the repository's `_scale` files; constant columns are dropped).
"""
import csv
import os
import sys

NUMERIC = {
    # name: (keel file, output file, label column mapping to +1)
    "heart": ("heart.dat", "heart.libsvm", "2"),
    "breast-cancer": ("wisconsin.dat", "breast-cancer.libsvm", "4"),
    "australian": ("australian.dat", "australian.libsvm", "1"),
    "diabetes": ("pima.dat", "diabetes.libsvm", "tested_positive"),
}


def rows(path):
    with open(path) as fh:
        for rec in csv.reader(fh):
            rec = [c.strip() for c in rec]
            if not rec or rec[0].startswith("@"):
                continue
            yield rec


def fmt(v):
    f = float(v)
    return repr(int(f)) if f.is_integer() else repr(f)


def write_numeric(src, dst, positive):
    with open(dst, "w") as out:
        for rec in rows(src):
            *feats, label = rec
            y = "+1" if label == positive else "-1"
            toks = [f"{i}:{fmt(v)}" for i, v in enumerate(feats, 1) if float(v) != 0.0]
            out.write(" ".join([y] + toks) + "\n")


def write_scaled(src, dst, positive):
    data = list(rows(src))
    cols = list(zip(*[[float(v) for v in r[:-1]] for r in data]))
    lo = [min(c) for c in cols]
    hi = [max(c) for c in cols]
    with open(dst, "w") as out:
        for rec in data:
            *feats, label = rec
            y = "+1" if label == positive else "-1"
            toks = []
            for i, v in enumerate(feats):
                if hi[i] == lo[i]:
                    continue
                z = -1.0 + 2.0 * (float(v) - lo[i]) / (hi[i] - lo[i])
                if z != 0.0:
                    toks.append(f"{i + 1}:{z:.6g}")
            out.write(" ".join([y] + toks) + "\n")


def write_onehot(src, dst, positive):
    data = list(rows(src))
    ncols = len(data[0]) - 1
    vocab = [sorted({r[j] for r in data}) for j in range(ncols)]
    offset, base = [], 1
    for v in vocab:
        offset.append(base)
        base += len(v)
    with open(dst, "w") as out:
        for rec in data:
            *feats, label = rec
            y = "+1" if label == positive else "-1"
            idx = [offset[j] + vocab[j].index(v) for j, v in enumerate(feats)]
            out.write(" ".join([y] + [f"{i}:1" for i in idx]) + "\n")


def main():
    src, dst = sys.argv[1], sys.argv[2]
    os.makedirs(dst, exist_ok=True)
    for keel, out, pos in NUMERIC.values():
        write_numeric(os.path.join(src, keel), os.path.join(dst, out), pos)
        scaled = out.replace(".libsvm", "_scale.libsvm")
        write_scaled(os.path.join(src, keel), os.path.join(dst, scaled), pos)
    write_onehot(os.path.join(src, "mushroom.dat"), os.path.join(dst, "mushrooms.libsvm"), "p")


if __name__ == "__main__":
    main()
