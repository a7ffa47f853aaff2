#!/usr/bin/env python3
"""Write a 5000-image MNIST subset as IDX files.

The mlxtend wheel ships 5000 images sampled from the MNIST training set
(500 per class) as a gzipped CSV. This script downloads the wheel through
pip, extracts the CSV and splits it deterministically into a 4000-image
training pool and a 1000-image held-out test set (400/100 per class).

    python3 tools/fetch_mnist_subset.py --out data/mnist5k
"""

import argparse
import gzip
import io
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_csv(wheel: pathlib.Path | None) -> bytes:
    if wheel is None:
        tmp = pathlib.Path(tempfile.mkdtemp())
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                        "-d", str(tmp), "mlxtend==0.24.0"], check=True)
        wheel = next(tmp.glob("mlxtend-*.whl"))
    with zipfile.ZipFile(wheel) as z:
        return gzip.decompress(z.read(MEMBER))


def write_idx(path: pathlib.Path, dims, payload: bytes) -> None:
    header = struct.pack(">BBBB", 0, 0, 0x08, len(dims))
    header += b"".join(struct.pack(">I", d) for d in dims)
    path.write_bytes(header + payload)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/mnist5k")
    ap.add_argument("--wheel", type=pathlib.Path, default=None)
    args = ap.parse_args()

    rows = []
    for line in io.StringIO(fetch_csv(args.wheel).decode()):
        fields = line.strip().split(",")
        if len(fields) != 785:
            continue
        pixels = [int(v) for v in fields[:784]]
        rows.append((pixels, int(fields[784])))

    per_class = {c: [] for c in range(10)}
    for pixels, label in rows:
        per_class[label].append(pixels)

    train, test = [], []
    for label in range(10):
        images = per_class[label]
        n_test = len(images) // 5
        test += [(p, label) for p in images[:n_test]]
        train += [(p, label) for p in images[n_test:]]

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, split in (("train", train), ("test", test)):
        write_idx(out / f"{name}-images-idx3-ubyte", (len(split), 28, 28),
                  bytes(v for p, _ in split for v in p))
        write_idx(out / f"{name}-labels-idx1-ubyte", (len(split),),
                  bytes(l for _, l in split))
        print(f"{name}: {len(split)} images")
    return 0


if __name__ == "__main__":
    sys.exit(main())
