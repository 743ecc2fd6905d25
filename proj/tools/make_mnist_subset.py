#!/usr/bin/env python3
"""Write the bundled 5000-image MNIST subset as IDX files.

The images come from the MNIST sample that ships with mlxtend
(`mlxtend.data.mnist_data`). They are shuffled with a fixed seed and split
into 4000 training and 1000 test images.
"""
import argparse
import pathlib
import struct

import numpy as np
from mlxtend.data import mnist_data


def write_idx(path, magic, array):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(array.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/mnist-subset")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--train", type=int, default=4000)
    args = parser.parse_args()

    images, labels = mnist_data()
    order = np.random.RandomState(args.seed).permutation(len(labels))
    images = images[order].reshape(-1, 28, 28)
    labels = labels[order]

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.train
    write_idx(out / "train-images-idx3-ubyte", 0x803, images[:n])
    write_idx(out / "train-labels-idx1-ubyte", 0x801, labels[:n])
    write_idx(out / "test-images-idx3-ubyte", 0x803, images[n:])
    write_idx(out / "test-labels-idx1-ubyte", 0x801, labels[n:])


if __name__ == "__main__":
    main()
