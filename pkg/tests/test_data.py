import gzip
import struct

import numpy as np
import pytest

from fuzzypool.data import (
    LabeledDataset, add_gaussian_noise, center_crop_square, data_root, downscale, load_cifar10,
    load_cifar10_dir, load_corpus, load_gray_image, load_idx, load_mnist, read_netpbm, save_pgm,
    save_ppm, to_grayscale,
)
from fuzzypool.errors import FormatError, InputError
from fuzzypool.metrics import psnr


def write_idx(tmp_path, images, labels, image_magic=0x803, label_magic=0x801, gz=False):
    n, h, w = images.shape
    img = struct.pack(">IIII", image_magic, n, h, w) + images.astype(np.uint8).tobytes()
    lab = struct.pack(">II", label_magic, n) + labels.astype(np.uint8).tobytes()
    suffix = ".gz" if gz else ""
    ip, lp = tmp_path / f"img{suffix}", tmp_path / f"lab{suffix}"
    opener = gzip.open if gz else open
    with opener(ip, "wb") as fh:
        fh.write(img)
    with opener(lp, "wb") as fh:
        fh.write(lab)
    return ip, lp


@pytest.mark.parametrize("gz", [False, True])
def test_idx_roundtrip(tmp_path, gz):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(5, 4, 3))
    labels = rng.integers(0, 10, size=5)
    ds = load_idx(*write_idx(tmp_path, images, labels, gz=gz))
    assert ds.images.shape == (5, 1, 4, 3)
    np.testing.assert_allclose(ds.images[:, 0], images / 255.0, rtol=1e-6)
    np.testing.assert_array_equal(ds.labels, labels)


def test_idx_bad_magic(tmp_path):
    paths = write_idx(tmp_path, np.zeros((2, 2, 2)), np.zeros(2), image_magic=0x804)
    with pytest.raises(FormatError, match="offset 0"):
        load_idx(*paths)


def test_idx_truncated(tmp_path):
    ip, lp = write_idx(tmp_path, np.zeros((3, 4, 4)), np.zeros(3))
    ip.write_bytes(ip.read_bytes()[:-5])
    with pytest.raises(FormatError, match="truncated"):
        load_idx(ip, lp)


def test_cifar_roundtrip_and_truncation(tmp_path):
    rng = np.random.default_rng(1)
    pixels = rng.integers(0, 256, size=(3, 3, 32, 32), dtype=np.uint8)
    labels = np.array([3, 8, 0], dtype=np.uint8)
    blob = b"".join(bytes([l]) + p.tobytes() for l, p in zip(labels, pixels))
    path = tmp_path / "batch.bin"
    path.write_bytes(blob)
    ds = load_cifar10([path, path])
    assert ds.images.shape == (6, 3, 32, 32)
    np.testing.assert_array_equal(ds.labels, [3, 8, 0, 3, 8, 0])
    # channel planes: the second plane is green
    assert ds.images[1, 1, 0, 0] == pytest.approx(pixels[1, 1, 0, 0] / 255.0)
    path.write_bytes(blob[:-1])
    with pytest.raises(FormatError):
        load_cifar10(path)


def test_dataset_invariants():
    with pytest.raises(FormatError):
        LabeledDataset(np.zeros((2, 1, 2, 2)), np.array([0, 10]))
    with pytest.raises(FormatError):
        LabeledDataset(np.full((1, 1, 2, 2), 1.5), np.array([0]))
    with pytest.raises(FormatError):
        LabeledDataset(np.zeros((2, 1, 2, 2)), np.array([0]))
    ds = LabeledDataset(np.zeros((4, 1, 2, 2)), np.arange(4))
    assert len(ds.subset(2)) == 2
    with pytest.raises(InputError):
        ds.subset(0)


def test_pgm_roundtrip_is_bit_exact(tmp_path):
    img = np.random.default_rng(2).integers(0, 256, size=(7, 9)).astype(np.float64)
    save_pgm(tmp_path / "a.pgm", img)
    back = load_gray_image(tmp_path / "a.pgm")
    assert back.shape == (7, 9)
    np.testing.assert_array_equal(back, img)


def test_ppm_converted_with_luma(tmp_path):
    rgb = np.zeros((2, 2, 3))
    rgb[0, 0] = (200, 100, 50)
    save_ppm(tmp_path / "c.ppm", rgb)
    gray = load_gray_image(tmp_path / "c.ppm")
    assert gray[0, 0] == pytest.approx(0.299 * 200 + 0.587 * 100 + 0.114 * 50)
    assert to_grayscale(255, 255, 255) == pytest.approx(255)


def test_netpbm_header_comments_and_maxval(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 1\n# another\n15\n" + bytes([15, 0]))
    raster, magic = read_netpbm(path)
    assert magic == "P5"
    np.testing.assert_array_equal(raster, [[255, 0]])


def test_ascii_netpbm_rejected(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(FormatError):
        load_gray_image(path)


def test_corpus_loading(tmp_path):
    with pytest.raises(InputError):
        load_corpus(tmp_path)
    save_pgm(tmp_path / "b.pgm", np.zeros((4, 4)))
    save_pgm(tmp_path / "a.pgm", np.ones((4, 4)))
    assert [name for name, _ in load_corpus(tmp_path)] == ["a", "b"]


def test_downscale_examples():
    np.testing.assert_array_equal(downscale(np.full((512, 512), 33.0)), np.full((256, 256), 33.0))
    board = (np.indices((512, 512)).sum(axis=0) % 2) * 255.0
    np.testing.assert_array_equal(downscale(board), np.full((256, 256), 127.5))
    odd = downscale(np.full((300, 300), 10.0))
    assert odd.shape == (256, 256)
    np.testing.assert_allclose(odd, 10.0)


def test_center_crop():
    img = np.arange(12).reshape(3, 4)
    np.testing.assert_array_equal(center_crop_square(img), img[:, :3])


def test_noise_zero_variance_and_seed():
    img = np.random.default_rng(3).uniform(0, 255, (16, 16))
    np.testing.assert_array_equal(add_gaussian_noise(img, 0.0, seed=1, peak=255), img)
    a = add_gaussian_noise(img, 0.01, seed=7, peak=255)
    b = add_gaussian_noise(img, 0.01, seed=7, peak=255)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 255


def test_noise_on_mid_gray_gives_about_20_db():
    img = np.full((256, 256), 127.5)
    noisy = add_gaussian_noise(img, 0.01, seed=0, peak=255)
    assert psnr(img, noisy) == pytest.approx(20.0, abs=1.0)


def test_noise_empirical_variance():
    x = np.full(2_000_000, 0.5)
    noise = add_gaussian_noise(x, 0.01, seed=11) - x
    assert noise.var() == pytest.approx(0.01, rel=0.02)


def _real(loader, **kw):
    try:
        return loader(**kw)
    except FileNotFoundError:
        pytest.skip(f"dataset not present under {data_root()}")


@pytest.mark.slow
def test_real_mnist_sizes():
    assert len(_real(load_mnist, train=True)) == 60_000
    test = _real(load_mnist, train=False)
    assert len(test) == 10_000 and test.images.shape[1:] == (1, 28, 28)


@pytest.mark.slow
def test_real_cifar_sizes():
    assert len(_real(load_cifar10_dir, train=True)) == 50_000
    test = _real(load_cifar10_dir, train=False)
    assert len(test) == 10_000 and test.images.shape[1:] == (3, 32, 32)
