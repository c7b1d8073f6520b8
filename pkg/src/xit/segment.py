"""Segmentation-based shuffles built on SLIC superpixels.

Stream discipline: regions are processed in ascending label order, a
region's pixel positions always in row-major order.  Segmentation itself
is deterministic and consumes no draws, so a precomputed SegmentationMap
may be supplied (the sweep pipeline does this to share one segmentation
across several specs).
"""

from __future__ import annotations

import numpy as np

from .image import ImageBuffer
from .rng import Rng
from .slic import DEFAULT_COMPACTNESS, DEFAULT_ITERATIONS, SegmentationMap, slic_segment
from .transforms import _check_prob


def _segmentation_for(
    img: ImageBuffer,
    n_segments: int,
    compactness: float,
    iterations: int,
    segmentation: SegmentationMap | None,
) -> SegmentationMap:
    if segmentation is not None:
        if (segmentation.width, segmentation.height) != (img.width, img.height):
            raise ValueError("segmentation does not match image dimensions")
        return segmentation
    return slic_segment(img, n_segments, compactness, iterations)


def segmentation_within_shuffle(
    img: ImageBuffer,
    n_segments: int,
    p: float,
    rng: Rng,
    *,
    compactness: float = DEFAULT_COMPACTNESS,
    iterations: int = DEFAULT_ITERATIONS,
    segmentation: SegmentationMap | None = None,
) -> ImageBuffer:
    """Shuffle pixels inside each superpixel region with probability p.

    Region boundaries never move: each region keeps exactly its own pixel
    multiset (select-then-permute within the region, like the block
    shuffles).
    """
    _check_prob(p)
    seg = _segmentation_for(img, n_segments, compactness, iterations, segmentation)
    flat = img.pixels.reshape(-1, 3).copy()
    for label in range(seg.region_count):
        coords = seg.region_pixels(label)
        n = coords.size
        selected = coords[rng.unit_floats(n) < p]
        if selected.size >= 2:
            perm = np.array(rng.permutation(selected.size), dtype=np.intp)
            flat[selected] = flat[selected][perm]
    return ImageBuffer(flat.reshape(img.height, img.width, 3))


def segmentation_displacement_shuffle(
    img: ImageBuffer,
    n_segments: int,
    rng: Rng,
    *,
    compactness: float = DEFAULT_COMPACTNESS,
    iterations: int = DEFAULT_ITERATIONS,
    segmentation: SegmentationMap | None = None,
) -> ImageBuffer:
    """Shuffle each region's pixels and move them into another region.

    One uniform permutation over region labels decides which source fills
    each destination (fixed points allowed).  Size mismatches are absorbed
    on the source side: a too-small source is padded by re-sampling (with
    replacement) the deficit from its own pixels and the combined pool is
    reshuffled; a too-large source drops its trailing surplus.  Output
    pixel values are therefore always drawn from the input image.

    Per destination (ascending label), the stream consumes: the source
    pool shuffle, then any resampling draws, then the combined reshuffle.
    """
    seg = _segmentation_for(img, n_segments, compactness, iterations, segmentation)
    k = seg.region_count
    flat = img.pixels.reshape(-1, 3)
    out = flat.copy()

    dest_of_source = rng.permutation(k)
    source_of_dest = [0] * k
    for src, dest in enumerate(dest_of_source):
        source_of_dest[dest] = src

    region_coords = [seg.region_pixels(label) for label in range(k)]
    for dest in range(k):
        src = source_of_dest[dest]
        src_vals = flat[region_coords[src]]
        dest_coords = region_coords[dest]
        need = dest_coords.size

        pool = src_vals[np.array(rng.permutation(src_vals.shape[0]), dtype=np.intp)]
        if pool.shape[0] < need:
            deficit = need - pool.shape[0]
            resampled = np.array(
                [rng.below(src_vals.shape[0]) for _ in range(deficit)], dtype=np.intp
            )
            pool = np.concatenate([pool, src_vals[resampled]])
            pool = pool[np.array(rng.permutation(need), dtype=np.intp)]
        elif pool.shape[0] > need:
            pool = pool[:need]
        out[dest_coords] = pool
    return ImageBuffer(out.reshape(img.height, img.width, 3))
