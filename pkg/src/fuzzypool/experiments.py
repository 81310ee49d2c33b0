"""Image-level experiments: pooling whole images and CNN feature maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PoolWindowSpec, output_dims
from .data import add_gaussian_noise
from .errors import ConfigError, ShapeError
from .membership import default_bank
from .metrics import QualityReport, compare_pooled_image, psnr
from .nn import ConvLayer, Network
from .pooling import OPERATORS, pool


def pool_image(img, operator: str, spec: PoolWindowSpec = PoolWindowSpec(), r_max: float = 6.0, tau: float = 0.0):
    """Pool a ``[0, 255]`` grayscale image as a single feature map.

    Pixels are mapped linearly onto the activation universe ``[0, r_max]``
    before pooling and back afterwards; ``tau`` is given in pixel units.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-D grayscale image, got shape {img.shape}")
    scale = r_max / 255.0
    pooled = pool(img[None] * scale, operator, spec, bank=default_bank(r_max), tau=tau * scale)
    return pooled[0] / scale


@dataclass(frozen=True)
class ComparisonRow:
    image: str
    operator: str
    report: QualityReport


def compare_poolings(corpus, spec=PoolWindowSpec(), operators=OPERATORS, r_max=6.0, tau=0.0, workers=1):
    """Quality of every operator on every ``(name, image)`` in ``corpus``.

    Returns per-image rows (corpus order, then operator order) and a dict of
    per-operator mean reports.
    """
    corpus = list(corpus)

    def run(item):
        name, img = item
        return [
            ComparisonRow(name, op, compare_pooled_image(img, pool_image(img, op, spec, r_max, tau)))
            for op in operators
        ]

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            chunks = list(ex.map(run, corpus))
    else:
        chunks = [run(item) for item in corpus]
    rows = [r for chunk in chunks for r in chunk]
    means = {}
    for op in operators:
        reps = [r.report for r in rows if r.operator == op]
        means[op] = QualityReport(
            rms_contrast=float(np.mean([r.rms_contrast for r in reps])),
            psnr_db=float(np.mean([r.psnr_db for r in reps])),
            ssim=float(np.mean([r.ssim for r in reps])),
        )
    return rows, means


def first_conv(network: Network) -> ConvLayer:
    for layer in network.layers:
        if isinstance(layer, ConvLayer):
            return layer
    raise ConfigError("network has no convolutional layer")


def conv_feature_maps(network: Network, img) -> np.ndarray:
    """Capped-ReLU output of the first conv layer for a ``[0, 255]`` grayscale image.

    The image is scaled to ``[0, 1]`` and replicated across the layer's input
    depth. Returns ``(filters, h', w')``.
    """
    conv = first_conv(network)
    depth = conv.weights.shape[1]
    x = np.repeat((np.asarray(img, dtype=np.float64) / 255.0)[None, None], depth, axis=1)
    maps, _ = conv.forward(x)
    return maps[0]


def decimate(maps, spec: PoolWindowSpec) -> np.ndarray:
    """Top-left element of every pooling window: the reference a pooled map is compared against."""
    h, w = maps.shape[-2:]
    grid = output_dims(spec, w, h)
    return maps[..., :: spec.stride, :: spec.stride][..., : grid.out_h, : grid.out_w]


@dataclass
class FeatureMapDump:
    noisy_image: np.ndarray
    input_psnr: float
    reference: np.ndarray  # decimated conv maps, (filters, oh, ow)
    conv_maps: np.ndarray
    pooled: dict  # operator -> (filters, oh, ow)
    psnr_db: dict  # operator -> PSNR over all channels
    channel_psnr: dict  # operator -> list per channel


def featuremap_experiment(
    network: Network, img, variance=0.01, seed=0, spec=PoolWindowSpec(), operators=OPERATORS, tau=0.0
) -> FeatureMapDump:
    """Noise the image, run the first conv layer, pool its maps with each operator.

    PSNR (peak ``r_max``) compares each pooled stack with the decimated conv
    output of the same noisy input.
    """
    r_max = network.config.r_max
    noisy = add_gaussian_noise(img, variance, seed=seed, peak=255.0)
    maps = conv_feature_maps(network, noisy)
    ref = decimate(maps, spec)
    bank = default_bank(r_max)
    pooled, overall, per_channel = {}, {}, {}
    for op in operators:
        out = pool(maps, op, spec, bank=bank, tau=tau)
        pooled[op] = out
        overall[op] = psnr(ref, out, peak=r_max)
        per_channel[op] = [psnr(ref[c], out[c], peak=r_max) for c in range(len(out))]
    return FeatureMapDump(noisy, psnr(img, noisy), ref, maps, pooled, overall, per_channel)


def normalize_channel(channel, lo, hi) -> np.ndarray:
    """Map ``[lo, hi]`` onto ``[0, 255]``; a flat range maps to 0."""
    if hi <= lo:
        return np.zeros_like(channel, dtype=np.float64)
    return np.clip((channel - lo) * (255.0 / (hi - lo)), 0, 255)
