"""Natural-image corpus built from the sample photographs bundled with scikit-image.

Selection rule, fixed before any pooling result was computed: every bundled
photograph of a real scene or object, excluding documents, text, microscopy
and synthetic test patterns. Each image is converted to grayscale, centre
cropped to a square, downscaled to 256 x 256 and rounded to 8-bit levels.
"""
import numpy as np

from fuzzypool.data import center_crop_square, downscale, save_pgm, to_grayscale

NAMES = (
    "astronaut", "brick", "camera", "chelsea", "coffee", "coins", "grass", "gravel",
    "hubble_deep_field", "moon", "motorcycle", "rocket",
)
SIDE = 256


def _raw(name):
    from skimage import data

    if name == "motorcycle":
        return data.stereo_motorcycle()[0]
    return getattr(data, name)()


def prepare(img, side=SIDE):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = to_grayscale(img[..., 0], img[..., 1], img[..., 2])
    return np.round(downscale(center_crop_square(img), side))


def natural_corpus(side=SIDE):
    """``[(name, 256x256 float image in [0, 255])]`` in name order."""
    return [(name, prepare(_raw(name), side)) for name in NAMES]


def write_corpus(directory, side=SIDE):
    for name, img in natural_corpus(side):
        save_pgm(f"{directory}/{name}.pgm", img)
