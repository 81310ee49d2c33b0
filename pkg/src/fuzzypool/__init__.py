"""Type-1 fuzzy pooling for CNNs, with baseline poolers, a small trainable CNN and image-quality tooling."""
from .core import OutputGrid, PoolWindowSpec, extract_patches, output_dims, scatter_to_volume
from .membership import MembershipBank, capped_relu, default_bank
from .pooling import OPERATORS, pool, pool_backward, pool_forward

__version__ = "0.1.0"

__all__ = [
    "OPERATORS",
    "MembershipBank",
    "OutputGrid",
    "PoolWindowSpec",
    "capped_relu",
    "default_bank",
    "extract_patches",
    "output_dims",
    "pool",
    "pool_backward",
    "pool_forward",
    "scatter_to_volume",
]
