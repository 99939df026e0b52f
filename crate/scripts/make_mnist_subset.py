"""Build the small MNIST IDX subset in data/mnist from the `mnist` npm package.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 scripts/make_mnist_subset.py package/src/digits data/mnist
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_PER_DIGIT = 200
TEST_PER_DIGIT = 100


def write_idx(out: Path, stem: str, items):
    images = out / f"{stem}-images-idx3-ubyte"
    labels = out / f"{stem}-labels-idx1-ubyte"
    with open(images, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(items), 28, 28))
        for pixels, _ in items:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in pixels))
    with open(labels, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(items)))
        f.write(bytes(label for _, label in items))


def main(src: str, dst: str):
    out = Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        data = json.load(open(Path(src) / f"{digit}.json"))["data"]
        images = [data[i * 784:(i + 1) * 784] for i in range(len(data) // 784)]
        train += [(img, digit) for img in images[:TRAIN_PER_DIGIT]]
        test += [(img, digit) for img in images[TRAIN_PER_DIGIT:TRAIN_PER_DIGIT + TEST_PER_DIGIT]]
    rng = random.Random(20221001)
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(out, "train", train)
    write_idx(out, "t10k", test)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
