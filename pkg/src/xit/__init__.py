"""Extreme image transformations and the apparatus around them.

Seven deterministic pixel-shuffle transforms over a three-variable
parameter space, a seeded sweep pipeline with manifests and study-set
sampling, an HTTP trial service for psychophysics sessions, and the
statistics used to compare human and network observers.
"""

from .image import ImageBuffer, load_image, save_image
from .rng import Rng, fisher_yates
from .slic import SegmentationMap, slic_segment
from .segment import segmentation_displacement_shuffle, segmentation_within_shuffle
from .specs import TransformSpec, full_sweep
from .transforms import (
    FlattenedImage,
    color_flatten,
    full_random_shuffle,
    grid_shuffle,
    local_structure_shuffle,
    render_flattened,
    unflatten,
    within_grid_shuffle,
)

__version__ = "0.1.0"

__all__ = [
    "ImageBuffer",
    "Rng",
    "fisher_yates",
    "load_image",
    "save_image",
    "TransformSpec",
    "full_sweep",
    "FlattenedImage",
    "full_random_shuffle",
    "grid_shuffle",
    "within_grid_shuffle",
    "local_structure_shuffle",
    "color_flatten",
    "render_flattened",
    "unflatten",
    "SegmentationMap",
    "slic_segment",
    "segmentation_within_shuffle",
    "segmentation_displacement_shuffle",
    "__version__",
]
