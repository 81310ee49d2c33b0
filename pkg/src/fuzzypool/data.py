"""Dataset and image I/O: IDX, CIFAR-10 binary, binary netpbm (P5/P6).

Grayscale images are 2-D float64 arrays on the ``[0, 255]`` scale. Dataset
images are ``(n, z, h, w)`` arrays scaled to ``[0, 1]``.
"""
from __future__ import annotations

import gzip
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, ParameterError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 32 * 32 * 3
LUMA = (0.299, 0.587, 0.114)


@dataclass
class LabeledDataset:
    images: np.ndarray  # (n, z, h, w) in [0, 1]
    labels: np.ndarray  # (n,) int64
    class_count: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise FormatError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise FormatError(f"labels outside [0, {self.class_count})")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise FormatError("pixel values outside [0, 1]")

    def __len__(self):
        return len(self.labels)

    def subset(self, n=None) -> "LabeledDataset":
        """The first ``n`` items (all of them when ``n`` is None)."""
        if n is None:
            return self
        if n < 1:
            raise InputError(f"subset size must be >= 1, got {n}")
        return LabeledDataset(self.images[:n], self.labels[:n], self.class_count)


def _read_bytes(path) -> bytes:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def _idx_header(data: bytes, path, magic: int, ndim: int):
    need = 4 + 4 * ndim
    if len(data) < need:
        raise FormatError(f"truncated IDX header ({len(data)} bytes)", path, len(data))
    found = struct.unpack_from(">I", data, 0)[0]
    if found != magic:
        raise FormatError(f"bad IDX magic 0x{found:08x}, expected 0x{magic:08x}", path, 0)
    return struct.unpack_from(">" + "I" * ndim, data, 4), need


def load_idx(images_path, labels_path, class_count: int = 10, dtype=np.float32) -> LabeledDataset:
    """Parse a pair of big-endian IDX files (MNIST, Fashion-MNIST). ``.gz`` is accepted."""
    img_bytes = _read_bytes(images_path)
    (n, rows, cols), off = _idx_header(img_bytes, images_path, IDX_IMAGES_MAGIC, 3)
    size = n * rows * cols
    if len(img_bytes) < off + size:
        raise FormatError(
            f"image data truncated: need {size} bytes for {n} images", images_path, len(img_bytes)
        )
    pixels = np.frombuffer(img_bytes, dtype=np.uint8, count=size, offset=off)
    lab_bytes = _read_bytes(labels_path)
    (n_labels,), loff = _idx_header(lab_bytes, labels_path, IDX_LABELS_MAGIC, 1)
    if n_labels != n:
        raise FormatError(f"{n_labels} labels for {n} images", labels_path, 4)
    if len(lab_bytes) < loff + n:
        raise FormatError(f"label data truncated: need {n} bytes", labels_path, len(lab_bytes))
    labels = np.frombuffer(lab_bytes, dtype=np.uint8, count=n, offset=loff).astype(np.int64)
    images = (pixels.reshape(n, 1, rows, cols) / 255.0).astype(dtype)
    return LabeledDataset(images, labels, class_count)


def load_cifar10(paths, dtype=np.float32) -> LabeledDataset:
    """Parse CIFAR-10 binary batches: 1 label byte then 3072 channel-planar pixels per record."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    images, labels = [], []
    for path in paths:
        data = _read_bytes(path)
        if len(data) == 0 or len(data) % CIFAR_RECORD:
            raise FormatError(
                f"file length {len(data)} is not a multiple of {CIFAR_RECORD}",
                path, len(data) - len(data) % CIFAR_RECORD,
            )
        rec = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels.append(rec[:, 0].astype(np.int64))
        images.append(rec[:, 1:].reshape(-1, 3, 32, 32))
    pixels = np.concatenate(images)
    return LabeledDataset((pixels / 255.0).astype(dtype), np.concatenate(labels), 10)


# -- dataset discovery --------------------------------------------------------


def data_root() -> Path:
    """``$FUZZYPOOL_DATA`` if set, else ``~/data``."""
    return Path(os.environ.get("FUZZYPOOL_DATA", Path.home() / "data"))


def _first_existing(directory: Path, names):
    for name in names:
        for candidate in (directory / name, directory / (name + ".gz")):
            if candidate.exists():
                return candidate
    raise FileNotFoundError(f"none of {names} found in {directory}")


def load_mnist(directory=None, train: bool = True, dtype=np.float32) -> LabeledDataset:
    """Load MNIST-style IDX files from ``directory`` (default ``<data_root>/mnist``)."""
    directory = Path(directory) if directory else data_root() / "mnist"
    prefix = "train" if train else "t10k"
    images = _first_existing(directory, [f"{prefix}-images-idx3-ubyte", f"{prefix}-images.idx3-ubyte"])
    labels = _first_existing(directory, [f"{prefix}-labels-idx1-ubyte", f"{prefix}-labels.idx1-ubyte"])
    return load_idx(images, labels, dtype=dtype)


def load_cifar10_dir(directory=None, train: bool = True, dtype=np.float32) -> LabeledDataset:
    """Load ``cifar-10-batches-bin`` (default ``<data_root>/cifar-10-batches-bin``)."""
    directory = Path(directory) if directory else data_root() / "cifar-10-batches-bin"
    names = [f"data_batch_{i}.bin" for i in range(1, 6)] if train else ["test_batch.bin"]
    return load_cifar10([_first_existing(directory, [n]) for n in names], dtype=dtype)


# -- netpbm -------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_netpbm(path):
    """Read a binary P5/P6 file; returns ``(uint8 array, magic)``.

    P5 gives ``(h, w)``, P6 gives ``(h, w, 3)``.
    """
    data = _read_bytes(path)
    tokens, pos = [], 0
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated netpbm header", path, pos)
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0].decode("ascii", "replace")
    if magic not in ("P5", "P6"):
        raise FormatError(f"unsupported netpbm type {magic!r} (binary P5/P6 only)", path, 0)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"bad netpbm header: {exc}", path, 2) from exc
    if not 0 < maxval <= 255:
        raise FormatError(f"maxval {maxval} unsupported (8-bit only)", path, pos)
    pos += 1  # single whitespace byte after maxval
    channels = 3 if magic == "P6" else 1
    size = width * height * channels
    if len(data) < pos + size:
        raise FormatError(f"raster truncated: need {size} bytes", path, len(data))
    raster = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos)
    shape = (height, width, 3) if channels == 3 else (height, width)
    raster = raster.reshape(shape)
    if maxval != 255:
        raster = np.round(raster * (255.0 / maxval)).astype(np.uint8)
    return raster, magic


def to_grayscale(r, g, b):
    """ITU-R BT.601 luma."""
    return LUMA[0] * np.asarray(r, dtype=np.float64) + LUMA[1] * np.asarray(g, dtype=np.float64) + LUMA[2] * np.asarray(b, dtype=np.float64)


def load_gray_image(path) -> np.ndarray:
    raster, magic = read_netpbm(path)
    if magic == "P6":
        return to_grayscale(raster[..., 0], raster[..., 1], raster[..., 2])
    return raster.astype(np.float64)


def to_uint8(img) -> np.ndarray:
    return np.clip(np.round(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)


def save_pgm(path, img) -> None:
    """Write a P5 file; values are rounded and clipped to ``[0, 255]``."""
    raster = to_uint8(img)
    if raster.ndim != 2:
        raise FormatError(f"P5 needs a 2-D image, got shape {raster.shape}", path)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def save_ppm(path, rgb) -> None:
    raster = to_uint8(rgb)
    if raster.ndim != 3 or raster.shape[2] != 3:
        raise FormatError(f"P6 needs an (h, w, 3) image, got shape {raster.shape}", path)
    h, w, _ = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def load_corpus(directory):
    """All ``.pgm``/``.ppm`` images in ``directory`` as ``(name, grayscale image)``, sorted by name."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
    if not files:
        raise InputError(f"no .pgm/.ppm images in {directory}")
    return [(p.stem, load_gray_image(p)) for p in files]


# -- resampling and noise -----------------------------------------------------


def center_crop_square(img) -> np.ndarray:
    img = np.asarray(img)
    h, w = img.shape[:2]
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    return img[top : top + side, left : left + side]


def _bilinear(img, out_h, out_w):
    h, w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def downscale(img, side: int = 256) -> np.ndarray:
    """Resize to ``side x side``: block averaging for integral ratios, bilinear otherwise."""
    if side < 1:
        raise ParameterError(f"side must be >= 1, got {side}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if h % side == 0 and w % side == 0:
        fh, fw = h // side, w // side
        return img.reshape(side, fh, side, fw).mean(axis=(1, 3))
    return _bilinear(img, side, side)


def add_gaussian_noise(x, variance: float = 0.01, seed=None, peak: float = 1.0) -> np.ndarray:
    """Add i.i.d. ``N(0, variance)`` noise on the ``[0, 1]``-normalised scale, then clamp.

    ``peak`` is the value that maps to 1 (use 255 for 8-bit images).
    """
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    x = np.asarray(x, dtype=np.float64)
    if variance == 0:
        return x.copy()
    rng = np.random.default_rng(seed)
    noisy = x / peak + rng.normal(0.0, np.sqrt(variance), size=x.shape)
    return np.clip(noisy, 0.0, 1.0) * peak
