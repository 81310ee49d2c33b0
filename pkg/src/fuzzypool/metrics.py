"""Image-quality and classification metrics.

Images are 2-D float arrays on the ``[0, 255]`` scale unless a different
``peak`` is passed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError, ShapeError

SSIM_WINDOW = 8
K1, K2 = 0.01, 0.03


@dataclass(frozen=True)
class QualityReport:
    rms_contrast: float
    psnr_db: float  # math.inf when the images are identical
    ssim: float


def _pair(reference, test):
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rms_contrast(img) -> float:
    """Population standard deviation of the pixel intensities."""
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise InputError("empty image")
    return float(img.std())


def psnr(reference, test, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    a, b = _pair(reference, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def ssim(reference, test, window: int = SSIM_WINDOW, peak: float = 255.0) -> float:
    """Mean structural similarity over all ``window x window`` positions (stride 1).

    Uniform weights, sample (n-1) variances and covariance, constants
    ``(0.01*peak)^2`` and ``(0.03*peak)^2``.
    """
    a, b = _pair(reference, test)
    if a.ndim != 2 or min(a.shape) < window:
        raise ShapeError(f"SSIM needs 2-D images of side >= {window}, got {a.shape}")
    c1 = (K1 * peak) ** 2
    c2 = (K2 * peak) ** 2
    n = window * window
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).sum(axis=(-2, -1)) / (n - 1)
    var_b = (db * db).sum(axis=(-2, -1)) / (n - 1)
    cov = (da * db).sum(axis=(-2, -1)) / (n - 1)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.size == 0:
        raise InputError("accuracy of an empty prediction set is undefined")
    if p.shape != y.shape:
        raise ShapeError(f"{p.shape} predictions vs {y.shape} labels")
    return float(np.mean(p == y))


def upsample_nearest(img, factor: int) -> np.ndarray:
    img = np.asarray(img)
    return np.repeat(np.repeat(img, factor, axis=0), factor, axis=1)


def compare_pooled_image(original, pooled) -> QualityReport:
    """Quality of a pooled image against the image it was pooled from.

    The pooled image is nearest-neighbour upsampled back to the original size
    for PSNR and SSIM; RMS contrast is taken on the pooled image itself.
    """
    original = np.asarray(original, dtype=np.float64)
    pooled = np.asarray(pooled, dtype=np.float64)
    if original.ndim != 2 or pooled.ndim != 2:
        raise ShapeError("compare_pooled_image expects 2-D grayscale images")
    oh, ow = original.shape
    ph, pw = pooled.shape
    if ph == 0 or oh % ph or ow % pw or oh // ph != ow // pw:
        raise ShapeError(f"pooled size {pooled.shape} is not an integer reduction of {original.shape}")
    up = upsample_nearest(pooled, oh // ph)
    return QualityReport(
        rms_contrast=rms_contrast(pooled),
        psnr_db=psnr(original, up),
        ssim=ssim(original, up),
    )
