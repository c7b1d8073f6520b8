"""Image buffer type and lossless PNG I/O.

Images are H x W grids of 8-bit (r, g, b) triplets, stored row-major.
Only 8-bit RGB PNG is supported: RGBA input is accepted with the alpha
plane stripped (and a warning), 16-bit input is rejected.  The round trip
load(save(img)) is byte-identical.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class UnsupportedImageError(ValueError):
    """Raised for inputs outside the 8-bit RGB contract."""


@dataclass(eq=False)
class ImageBuffer:
    """Row-major (height, width, 3) uint8 pixel grid."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must have shape (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.pixels.copy())

    def equals(self, other: "ImageBuffer") -> bool:
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    def tobytes(self) -> bytes:
        return np.ascontiguousarray(self.pixels).tobytes()


def load_image(path) -> ImageBuffer:
    """Load an 8-bit RGB PNG (or other losslessly decodable RGB image).

    RGBA input has its alpha channel dropped with a warning; 16-bit and
    non-RGB inputs (grayscale, palette) are rejected.
    """
    path = Path(path)
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
            raise UnsupportedImageError(f"{path}: unsupported bit depth (16-bit)")
        if im.mode == "RGBA":
            warnings.warn(f"{path}: stripping alpha channel", stacklevel=2)
            im = im.convert("RGB")
        elif im.mode != "RGB":
            raise UnsupportedImageError(
                f"{path}: unsupported pixel format {im.mode!r} (need RGB)"
            )
        arr = np.asarray(im, dtype=np.uint8)
    return ImageBuffer(arr)


def save_image(img: ImageBuffer, path) -> None:
    """Write img as an 8-bit RGB PNG (lossless; deterministic bytes)."""
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise UnsupportedImageError(f"{path}: only .png output is supported")
    Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")
