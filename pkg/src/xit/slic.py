"""SLIC superpixel segmentation (localized k-means in CIELAB + position).

Deterministic, draw-free: grid-initialized cluster centers perturbed to
the lowest-gradient pixel of their 3x3 neighborhood, then iterated
assignment within a 2S x 2S window under the combined distance

    D = sqrt(d_lab^2 + (d_xy / S)^2 * m^2),      S = sqrt(W*H / k)

followed by center updates.  After the final iteration, 4-connectivity is
enforced by relabeling orphan components into their largest adjacent
region, and labels are compacted to 0..K-1 in row-major first-appearance
order.  The actual region count K may differ from the requested k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .image import ImageBuffer

DEFAULT_COMPACTNESS = 10.0
DEFAULT_ITERATIONS = 10

# sRGB -> XYZ (D65) matrix and Lab constants
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_LAB_DELTA = 6.0 / 29.0


@dataclass(eq=False)
class SegmentationMap:
    """Per-pixel region labels 0..K-1 over a width x height grid."""

    width: int
    height: int
    labels: np.ndarray  # (height, width) int32
    region_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != (self.height, self.width):
            raise ValueError("labels shape must be (height, width)")
        self.labels = labels.astype(np.int32, copy=False)

    def region_pixels(self, label: int) -> np.ndarray:
        """Flat row-major indices of the region's pixels, ascending."""
        return np.flatnonzero(self.labels.reshape(-1) == label)

    def region_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.reshape(-1), minlength=self.region_count)


def srgb_to_lab(pixels: np.ndarray) -> np.ndarray:
    """Convert (..., 3) uint8 sRGB to CIELAB (D65 reference white)."""
    rgb = pixels.astype(np.float64) / 255.0
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB2XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _init_centers(lab: np.ndarray, k: int) -> np.ndarray:
    """Grid seeds (roughly k of them), each moved to the lowest-gradient
    pixel of its 3x3 neighborhood.  Returns (K0, 5) rows [y, x, L, a, b]."""
    h, w = lab.shape[:2]
    spacing = np.sqrt(w * h / k)
    nx = max(1, round(w / spacing))
    ny = max(1, round(h / spacing))

    # squared gradient magnitude from central differences on Lab
    grad = np.full((h, w), np.inf)
    if h > 2 and w > 2:
        gy = lab[2:, 1:-1] - lab[:-2, 1:-1]
        gx = lab[1:-1, 2:] - lab[1:-1, :-2]
        grad[1:-1, 1:-1] = (gy**2).sum(axis=-1) + (gx**2).sum(axis=-1)
    else:
        grad[:] = 0.0

    centers = []
    for j in range(ny):
        for i in range(nx):
            cy = min(h - 1, int((j + 0.5) * h / ny))
            cx = min(w - 1, int((i + 0.5) * w / nx))
            y0, y1 = max(cy - 1, 0), min(cy + 2, h)
            x0, x1 = max(cx - 1, 0), min(cx + 2, w)
            window = grad[y0:y1, x0:x1]
            # argmin is row-major, so ties resolve deterministically
            dy, dx = np.unravel_index(np.argmin(window), window.shape)
            y, x = y0 + int(dy), x0 + int(dx)
            centers.append([y, x, lab[y, x, 0], lab[y, x, 1], lab[y, x, 2]])
    return np.array(centers, dtype=np.float64)


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Relabel orphan 4-connected components to their largest adjacent region.

    Region areas are frozen at entry; each non-largest component of every
    label is merged into the adjacent region with the largest frozen area
    (ties go to the smaller label).  Components are visited label-ascending,
    then by descending size / ascending first pixel, so the result is
    deterministic.
    """
    h, w = labels.shape
    out = labels.copy()
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    areas = np.bincount(labels.reshape(-1)).astype(np.int64)
    flat_index = np.arange(h * w).reshape(h, w)
    for label in range(areas.size):
        if areas[label] == 0:
            continue
        comp, ncomp = ndimage.label(out == label, structure=structure)
        if ncomp <= 1:
            continue
        sizes = np.bincount(comp.reshape(-1))[1:]
        first_pixels = ndimage.minimum(flat_index, comp, index=range(1, ncomp + 1))
        slices = ndimage.find_objects(comp)
        order = sorted(range(ncomp), key=lambda c: (-sizes[c], first_pixels[c]))
        for c in order[1:]:  # keep the largest component
            sy, sx = slices[c]
            y0, y1 = max(sy.start - 1, 0), min(sy.stop + 1, h)
            x0, x1 = max(sx.start - 1, 0), min(sx.stop + 1, w)
            window = out[y0:y1, x0:x1]
            cmask = comp[y0:y1, x0:x1] == (c + 1)
            ring = ndimage.binary_dilation(cmask, structure=structure) & ~cmask
            neighbors = set(np.unique(window[ring]).tolist())
            neighbors.discard(label)
            if not neighbors:
                continue
            target = max(neighbors, key=lambda v: (areas[v], -v))
            window[cmask] = target
    return out


def _compact_labels(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Remap labels to 0..K-1 in row-major first-appearance order."""
    flat = labels.reshape(-1)
    uniques, first_idx = np.unique(flat, return_index=True)
    order = uniques[np.argsort(first_idx)]
    remap = np.empty(int(flat.max()) + 1, dtype=np.int32)
    remap[order] = np.arange(order.size, dtype=np.int32)
    return remap[flat].reshape(labels.shape), int(order.size)


def slic_segment(
    img: ImageBuffer,
    n_segments: int,
    compactness: float = DEFAULT_COMPACTNESS,
    iterations: int = DEFAULT_ITERATIONS,
) -> SegmentationMap:
    """Segment img into roughly n_segments 4-connected superpixel regions."""
    h, w = img.height, img.width
    if not 1 <= n_segments <= w * h:
        raise ValueError(f"n_segments must be in [1, {w * h}], got {n_segments}")
    if compactness <= 0:
        raise ValueError("compactness must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    lab = srgb_to_lab(img.pixels)
    spacing = np.sqrt(w * h / n_segments)
    centers = _init_centers(lab, n_segments)
    ratio2 = (compactness / spacing) ** 2

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    labels = np.zeros((h, w), dtype=np.int32)

    for _ in range(iterations):
        dist = np.full((h, w), np.inf)
        labels.fill(-1)
        win = int(np.ceil(spacing))
        for ci in range(centers.shape[0]):
            cy, cx = centers[ci, 0], centers[ci, 1]
            y0, y1 = max(int(cy) - win, 0), min(int(cy) + win + 1, h)
            x0, x1 = max(int(cx) - win, 0), min(int(cx) + win + 1, w)
            if y0 >= y1 or x0 >= x1:
                continue
            dlab2 = ((lab[y0:y1, x0:x1] - centers[ci, 2:]) ** 2).sum(axis=-1)
            dxy2 = (ys[y0:y1, None] - cy) ** 2 + (xs[None, x0:x1] - cx) ** 2
            d = dlab2 + dxy2 * ratio2
            window_dist = dist[y0:y1, x0:x1]
            better = d < window_dist
            window_dist[better] = d[better]
            labels[y0:y1, x0:x1][better] = ci
        # pixels outside every window (possible with drifting centers):
        # assign to the spatially nearest center
        missing = labels < 0
        if missing.any():
            my, mx = np.nonzero(missing)
            d2 = (my[:, None] - centers[None, :, 0]) ** 2 + (
                mx[:, None] - centers[None, :, 1]
            ) ** 2
            labels[my, mx] = np.argmin(d2, axis=1)
        # recompute centers as the mean of their assigned pixels
        flat = labels.reshape(-1)
        counts = np.bincount(flat, minlength=centers.shape[0]).astype(np.float64)
        nonempty = counts > 0
        sums = np.zeros((centers.shape[0], 5))
        sums[:, 0] = np.bincount(flat, weights=np.repeat(ys, w), minlength=centers.shape[0])
        sums[:, 1] = np.bincount(flat, weights=np.tile(xs, h), minlength=centers.shape[0])
        for c in range(3):
            sums[:, 2 + c] = np.bincount(
                flat, weights=lab[:, :, c].reshape(-1), minlength=centers.shape[0]
            )
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]

    labels = _enforce_connectivity(labels)
    labels, count = _compact_labels(labels)
    return SegmentationMap(width=w, height=h, labels=labels, region_count=count)


def export_segmentation_debug(
    seg: SegmentationMap,
    png_path,
    requested_segments: int,
    compactness: float = DEFAULT_COMPACTNESS,
    iterations: int = DEFAULT_ITERATIONS,
) -> None:
    """Write a label PNG (8-bit when K <= 256, else 16-bit) plus a JSON sidecar."""
    png_path = Path(png_path)
    if seg.region_count <= 256:
        im = Image.fromarray(seg.labels.astype(np.uint8), mode="L")
    else:
        im = Image.fromarray(seg.labels.astype(np.uint16))
    im.save(png_path, format="PNG")
    sidecar = {
        "requested_k": requested_segments,
        "actual_k": seg.region_count,
        "compactness": compactness,
        "iters": iterations,
    }
    png_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
