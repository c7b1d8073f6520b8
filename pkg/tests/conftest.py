"""Shared fixtures: deterministic synthetic images and a session-scoped
sweep over a 10-image corpus (reused by the pipeline tests and the
acceptance suite to keep runtime down).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from xit import ImageBuffer, Rng, save_image
from xit.sweep import SweepManifest, apply_sweep

CORPUS_SIZE = 10
CORPUS_SEED = 42


def noise_image(seed: int, size: int = 16, width: int | None = None) -> ImageBuffer:
    """Uniform-random pixels from the package RNG (deterministic)."""
    h, w = size, width or size
    raw = Rng(seed).u64_block(h * w * 3) & np.uint64(255)
    return ImageBuffer(raw.astype(np.uint8).reshape(h, w, 3))


def smooth_image(seed: int, size: int = 320) -> ImageBuffer:
    """Blobs plus waves: structured content that segments like a photo."""
    rng = Rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    chans = []
    for _ in range(3):
        f1 = rng.unit_float() * 0.05 + 0.01
        f2 = rng.unit_float() * 0.05 + 0.01
        phase = rng.unit_float() * 6.28
        cy, cx = rng.unit_float() * size, rng.unit_float() * size
        blob = 100 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * (size / 4) ** 2))
        wave = 80 * np.sin(f1 * xx + phase) + 60 * np.cos(f2 * yy)
        chans.append(np.clip(110 + wave + blob, 0, 255).astype(np.uint8))
    return ImageBuffer(np.stack(chans, axis=-1))


def packed_pixels(img: ImageBuffer) -> np.ndarray:
    """Sorted pixels as packed uint32 words, for exact multiset comparison."""
    px = img.pixels
    packed = (
        px[:, :, 0].astype(np.uint32) << 16
    ) | (px[:, :, 1].astype(np.uint32) << 8) | px[:, :, 2].astype(np.uint32)
    return np.sort(packed, axis=None)


def assert_same_multiset(a: ImageBuffer, b: ImageBuffer) -> None:
    assert a.pixels.shape == b.pixels.shape
    assert np.array_equal(packed_pixels(a), packed_pixels(b))


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """10 smooth 320x320 PNGs plus a labels CSV (10 classes)."""
    root = tmp_path_factory.mktemp("corpus")
    for i in range(CORPUS_SIZE):
        save_image(smooth_image(1000 + i), root / f"img{i:02d}.png")
    with open(root / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "class"])
        for i in range(CORPUS_SIZE):
            writer.writerow([f"img{i:02d}.png", f"class{i}"])
    return root


@pytest.fixture(scope="session")
def sweep_result(corpus_dir, tmp_path_factory) -> tuple[Path, SweepManifest]:
    """One full sweep over the corpus (the expensive shared fixture)."""
    out_dir = tmp_path_factory.mktemp("sweep_out")
    manifest = apply_sweep(corpus_dir, out_dir, master_seed=CORPUS_SEED)
    return out_dir, manifest
