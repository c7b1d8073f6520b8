"""The five block transforms: full random shuffle, grid shuffle, within-grid
shuffle, local structure shuffle, and color flatten.

All shuffles preserve the multiset of (r, g, b) pixel values; pixels always
move as whole triplets.  Probabilistic shuffles use select-then-permute:
each position is independently selected with probability p, then one
Fisher-Yates permutation is applied to the values at the selected positions
(written back in position-index order).  Unselected pixels never move, and
p = 1 yields a uniform full permutation.

RNG stream discipline (fixed so outputs are reproducible byte-for-byte):
selection draws come first, one unit float per pixel in row-major order
over the scope being shuffled, then the permutation draws.  Tiles are
processed in row-major order, each consuming its own selection and
permutation draws before the next tile starts.  The local structure
shuffle consumes all stage-1 (within-tile) draws, then the stage-2 tile
permutation draws, from the same stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import ImageBuffer
from .rng import Rng


class BlockSizeError(ValueError):
    """Raised when a block size does not divide the image dimensions."""


def _check_block(img: ImageBuffer, block_size: int) -> None:
    if block_size < 1:
        raise BlockSizeError("block size must be positive")
    if img.width % block_size or img.height % block_size:
        raise BlockSizeError(
            f"block size must divide image dimensions "
            f"({img.width}x{img.height} vs block {block_size})"
        )


def _check_prob(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"shuffle probability must be in [0, 1], got {p}")


def _shuffle_flat(flat: np.ndarray, p: float, rng: Rng) -> None:
    """Select-then-permute over a flat (n, 3) pixel view, in place.

    Consumes n selection floats, then the Fisher-Yates draws for the
    selected subset.
    """
    n = flat.shape[0]
    selected = np.flatnonzero(rng.unit_floats(n) < p)
    m = selected.size
    if m < 2:
        return
    perm = np.array(rng.permutation(m), dtype=np.intp)
    flat[selected] = flat[selected][perm]


def full_random_shuffle(img: ImageBuffer, p: float, rng: Rng) -> ImageBuffer:
    """Move pixels anywhere in the image with per-pixel probability p.

    p = 0 is the identity; p = 1 applies one uniform permutation to every
    pixel, leaving the image looking like noise.
    """
    _check_prob(p)
    out = img.pixels.copy()
    _shuffle_flat(out.reshape(-1, 3), p, rng)
    return ImageBuffer(out)


def _tile_view(pixels: np.ndarray, block_size: int) -> np.ndarray:
    """(T, block, block, 3) view of the image's tiles in row-major order."""
    h, w, _ = pixels.shape
    ty, tx = h // block_size, w // block_size
    tiles = pixels.reshape(ty, block_size, tx, block_size, 3)
    return tiles.transpose(0, 2, 1, 3, 4).reshape(ty * tx, block_size, block_size, 3)


def _untile(tiles: np.ndarray, height: int, width: int, block_size: int) -> np.ndarray:
    ty, tx = height // block_size, width // block_size
    out = tiles.reshape(ty, tx, block_size, block_size, 3)
    return out.transpose(0, 2, 1, 3, 4).reshape(height, width, 3)


def grid_shuffle(img: ImageBuffer, block_size: int, rng: Rng) -> ImageBuffer:
    """Partition into equal square tiles and permute the tile positions.

    Tile contents are copied verbatim (no rotation or flip); one
    Fisher-Yates draw over tile indices, so a tile may land at its own
    position.
    """
    _check_block(img, block_size)
    tiles = _tile_view(img.pixels, block_size)
    perm = np.array(rng.permutation(tiles.shape[0]), dtype=np.intp)
    return ImageBuffer(_untile(tiles[perm], img.height, img.width, block_size))


def within_grid_shuffle(img: ImageBuffer, block_size: int, p: float, rng: Rng) -> ImageBuffer:
    """Shuffle pixels inside each tile with probability p; tiles stay put.

    Each tile is treated as an independent image under the full random
    shuffle; with block_size equal to the image size this is bit-identical
    to full_random_shuffle.
    """
    _check_block(img, block_size)
    _check_prob(p)
    tiles = _tile_view(img.pixels, block_size).copy()
    for t in range(tiles.shape[0]):
        _shuffle_flat(tiles[t].reshape(-1, 3), p, rng)
    return ImageBuffer(_untile(tiles, img.height, img.width, block_size))


def local_structure_shuffle(img: ImageBuffer, block_size: int, p: float, rng: Rng) -> ImageBuffer:
    """Within-grid shuffle followed by a grid shuffle at the same block size.

    Alters local and global structure in one pass; both stages consume the
    same stream sequentially (stage 1 fully before stage 2).
    """
    stage1 = within_grid_shuffle(img, block_size, p, rng)
    return grid_shuffle(stage1, block_size, rng)


@dataclass(eq=False)
class FlattenedImage:
    """Channel-separated 1-D planes of a W x H image, row-major order."""

    width: int
    height: int
    channel_r: np.ndarray
    channel_g: np.ndarray
    channel_b: np.ndarray

    def __post_init__(self):
        n = self.width * self.height
        for name in ("channel_r", "channel_g", "channel_b"):
            ch = np.asarray(getattr(self, name))
            if ch.dtype != np.uint8 or ch.ndim != 1 or ch.size != n:
                raise ValueError(f"{name} must be a 1-D uint8 array of length {n}")
            setattr(self, name, ch)

    def equals(self, other: "FlattenedImage") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.channel_r, other.channel_r)
            and np.array_equal(self.channel_g, other.channel_g)
            and np.array_equal(self.channel_b, other.channel_b)
        )


def color_flatten(img: ImageBuffer) -> FlattenedImage:
    """Split the channels and flatten each to a 1-D row-major vector.

    Deterministic and draw-free: channel_c[y*W + x] == img(x, y).c.
    """
    px = img.pixels
    return FlattenedImage(
        width=img.width,
        height=img.height,
        channel_r=px[:, :, 0].reshape(-1).copy(),
        channel_g=px[:, :, 1].reshape(-1).copy(),
        channel_b=px[:, :, 2].reshape(-1).copy(),
    )


def unflatten(flat: FlattenedImage) -> ImageBuffer:
    """Exact inverse of color_flatten."""
    px = np.stack([flat.channel_r, flat.channel_g, flat.channel_b], axis=-1)
    return ImageBuffer(px.reshape(flat.height, flat.width, 3))


def render_flattened(flat: FlattenedImage) -> ImageBuffer:
    """Canonical (non-normative) visualization of a flattened image.

    Concatenates [R || G || B] into one vector of length 3*W*H and
    reinterprets it as interleaved row-major (r, g, b) triplets in a
    W x H frame.  A bijection on bytes, so distinct inputs render
    distinctly.
    """
    joined = np.concatenate([flat.channel_r, flat.channel_g, flat.channel_b])
    return ImageBuffer(joined.reshape(flat.height, flat.width, 3))


# raw planar container: magic + u16 width + u16 height + u32 reserved
# (little-endian), then the R, G and B planes as raw bytes
_PLANAR_MAGIC = b"XITF"
_PLANAR_HEADER = struct.Struct("<4sHHI")


def write_planar(flat: FlattenedImage, path) -> None:
    """Write the channel-separated planes to the raw planar format."""
    with open(path, "wb") as fh:
        fh.write(_PLANAR_HEADER.pack(_PLANAR_MAGIC, flat.width, flat.height, 0))
        fh.write(flat.channel_r.tobytes())
        fh.write(flat.channel_g.tobytes())
        fh.write(flat.channel_b.tobytes())


def read_planar(path) -> FlattenedImage:
    """Read a raw planar file written by write_planar."""
    data = Path(path).read_bytes()
    if len(data) < _PLANAR_HEADER.size:
        raise ValueError(f"{path}: truncated planar file")
    magic, width, height, _ = _PLANAR_HEADER.unpack_from(data)
    if magic != _PLANAR_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    n = width * height
    if len(data) != _PLANAR_HEADER.size + 3 * n:
        raise ValueError(f"{path}: payload length mismatch")
    planes = np.frombuffer(data, dtype=np.uint8, offset=_PLANAR_HEADER.size)
    return FlattenedImage(
        width=width,
        height=height,
        channel_r=planes[:n].copy(),
        channel_g=planes[n : 2 * n].copy(),
        channel_b=planes[2 * n :].copy(),
    )
