"""Put the datasets the acceptance suite needs under ``$FUZZYPOOL_DATA`` (default ``~/data``).

The canonical MNIST and CIFAR-10 hosts are often unreachable from build
machines, so this script rebuilds both from package-registry mirrors:

* MNIST: the four original IDX files ship inside the ``MNIST_dir==0.2`` wheel
  on PyPI.
* CIFAR-10: the npm package ``tfjs-cifar10@1.1.1`` stores each batch as one
  PNG (10000 rows of 1024 RGB pixels) plus JSON label lists. Rows are turned
  back into the standard 3073-byte binary records.
* natural256: 256x256 grayscale PGMs of the scikit-image sample photographs
  used by the image-quality checks.

    python tools/prepare_data.py all
    python tools/prepare_data.py mnist --wheel MNIST_dir-0.2-py3-none-any.whl
    python tools/prepare_data.py cifar --tarball tfjs-cifar10-1.1.1.tgz

Needs Pillow for the CIFAR PNGs and scikit-image for the corpus.
"""
import argparse
import io
import json
import os
import subprocess
import sys
import tarfile
import tempfile
import zipfile
from pathlib import Path

import numpy as np

MNIST_FILES = ("train-images.idx3-ubyte", "train-labels.idx1-ubyte", "t10k-images.idx3-ubyte", "t10k-labels.idx1-ubyte")
CIFAR_BATCHES = [f"data_batch_{i}" for i in range(1, 6)] + ["test_batch"]


def data_root():
    return Path(os.environ.get("FUZZYPOOL_DATA", Path.home() / "data"))


def fetch_wheel(workdir):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "MNIST_dir==0.2", "--no-deps", "-d", str(workdir)], check=True
    )
    return next(Path(workdir).glob("MNIST_dir-*.whl"))


def fetch_tarball(workdir):
    subprocess.run(["npm", "pack", "tfjs-cifar10@1.1.1"], cwd=workdir, check=True)
    return next(Path(workdir).glob("tfjs-cifar10-*.tgz"))


def prepare_mnist(wheel, target):
    target.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as zf:
        for member in zf.namelist():
            name = member.rsplit("/", 1)[-1]
            if name in MNIST_FILES and "__MACOSX" not in member:
                (target / name).write_bytes(zf.read(member))
    missing = [n for n in MNIST_FILES if not (target / n).exists()]
    if missing:
        raise SystemExit(f"wheel lacks {missing}")
    print(f"MNIST -> {target}")


def prepare_cifar(tarball, target):
    from PIL import Image

    target.mkdir(parents=True, exist_ok=True)
    with tarfile.open(tarball) as tf:
        read = lambda name: tf.extractfile(f"package/{name}").read()
        train_labels = json.loads(read("train_lables.json"))
        test_labels = json.loads(read("test_lables.json"))
        for i, batch in enumerate(CIFAR_BATCHES):
            rgb = np.asarray(Image.open(io.BytesIO(read(f"{batch}.png"))).convert("RGB"))  # (10000, 1024, 3)
            labels = test_labels if batch == "test_batch" else train_labels[i * 10000 : (i + 1) * 10000]
            planar = rgb.transpose(0, 2, 1).reshape(len(rgb), 3072)
            records = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], planar], axis=1)
            (target / f"{batch}.bin").write_bytes(records.astype(np.uint8).tobytes())
    print(f"CIFAR-10 -> {target}")


def prepare_corpus(target):
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
    from corpus import write_corpus

    target.mkdir(parents=True, exist_ok=True)
    write_corpus(target)
    print(f"natural256 -> {target}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("what", choices=["mnist", "cifar", "corpus", "all"])
    parser.add_argument("--wheel", help="local MNIST_dir wheel (skips pip download)")
    parser.add_argument("--tarball", help="local tfjs-cifar10 npm tarball (skips npm pack)")
    parser.add_argument("--root", type=Path, default=None, help="data root (default $FUZZYPOOL_DATA or ~/data)")
    args = parser.parse_args(argv)
    root = args.root or data_root()
    with tempfile.TemporaryDirectory() as tmp:
        if args.what in ("mnist", "all"):
            prepare_mnist(args.wheel or fetch_wheel(tmp), root / "mnist")
        if args.what in ("cifar", "all"):
            prepare_cifar(args.tarball or fetch_tarball(tmp), root / "cifar-10-batches-bin")
        if args.what in ("corpus", "all"):
            prepare_corpus(root / "natural256")


if __name__ == "__main__":
    main()
