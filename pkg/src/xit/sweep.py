"""Parameter-sweep pipeline: apply every transform spec to a corpus, write
outputs plus a JSON-lines manifest, and sample the study set.

Per-job seeds derive from sha256(master_seed | image_name | spec canonical
string), so jobs are independent, parallelizable and resumable without
changing outputs.  Segmentation is deterministic and draw-free, so one
SLIC run per (image, segment count) is shared by the specs that need it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import specs as sp
from .image import ImageBuffer, load_image, save_image
from .rng import Rng, fisher_yates
from .segment import segmentation_displacement_shuffle, segmentation_within_shuffle
from .slic import SegmentationMap, slic_segment
from .transforms import (
    FlattenedImage,
    color_flatten,
    full_random_shuffle,
    grid_shuffle,
    local_structure_shuffle,
    render_flattened,
    within_grid_shuffle,
    write_planar,
)

IMAGE_SUFFIXES = (".png",)


def derive_job_seed(master_seed: int, image_name: str, spec: sp.TransformSpec) -> int:
    """Stable 64-bit per-job seed from the master seed, image and spec."""
    text = f"{master_seed}|{image_name}|{spec.canonical()}"
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


@dataclass
class AppliedTransform:
    image: ImageBuffer
    flattened: FlattenedImage | None = None
    actual_segments: int | None = None


def apply_transform(
    img: ImageBuffer,
    spec: sp.TransformSpec,
    rng: Rng,
    segmentation: SegmentationMap | None = None,
) -> AppliedTransform:
    """Dispatch one spec.  Color flatten also returns the rendered frame."""
    kind = spec.kind
    if kind == sp.BASELINE:
        return AppliedTransform(image=img.copy())
    if kind == sp.FULL_RANDOM:
        return AppliedTransform(image=full_random_shuffle(img, spec.probability, rng))
    if kind == sp.GRID:
        return AppliedTransform(image=grid_shuffle(img, spec.block_size, rng))
    if kind == sp.WITHIN_GRID:
        return AppliedTransform(
            image=within_grid_shuffle(img, spec.block_size, spec.probability, rng)
        )
    if kind == sp.LOCAL_STRUCTURE:
        return AppliedTransform(
            image=local_structure_shuffle(img, spec.block_size, spec.probability, rng)
        )
    if kind == sp.COLOR_FLATTEN:
        flat = color_flatten(img)
        return AppliedTransform(image=render_flattened(flat), flattened=flat)
    if kind == sp.SEG_WITHIN:
        seg = segmentation or slic_segment(img, spec.segments)
        out = segmentation_within_shuffle(
            img, spec.segments, spec.probability, rng, segmentation=seg
        )
        return AppliedTransform(image=out, actual_segments=seg.region_count)
    if kind == sp.SEG_DISPLACEMENT:
        seg = segmentation or slic_segment(img, spec.segments)
        out = segmentation_displacement_shuffle(img, spec.segments, rng, segmentation=seg)
        return AppliedTransform(image=out, actual_segments=seg.region_count)
    raise ValueError(f"unknown transform kind {kind!r}")


@dataclass
class ManifestEntry:
    source_path: str
    spec: sp.TransformSpec
    seed: int
    output_path: str
    raw_path: str | None = None
    actual_segments: int | None = None

    def to_dict(self) -> dict:
        d = {
            "source_path": self.source_path,
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "output_path": self.output_path,
        }
        if self.raw_path is not None:
            d["raw_path"] = self.raw_path
        if self.actual_segments is not None:
            d["actual_segments"] = self.actual_segments
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(
            source_path=d["source_path"],
            spec=sp.TransformSpec.from_dict(d["spec"]),
            seed=d["seed"],
            output_path=d["output_path"],
            raw_path=d.get("raw_path"),
            actual_segments=d.get("actual_segments"),
        )


@dataclass
class SweepManifest:
    dataset_name: str
    created_at: str
    master_seed: int
    entries: list[ManifestEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def write(self, path) -> None:
        """JSON lines: one header record, then one record per entry."""
        with open(path, "w", encoding="utf-8") as fh:
            header = {
                "kind": "header",
                "dataset_name": self.dataset_name,
                "created_at": self.created_at,
                "master_seed": self.master_seed,
            }
            fh.write(json.dumps(header) + "\n")
            for msg in self.warnings:
                fh.write(json.dumps({"kind": "warning", "message": msg}) + "\n")
            for entry in self.entries:
                fh.write(json.dumps({"kind": "entry", **entry.to_dict()}) + "\n")

    @classmethod
    def read(cls, path) -> "SweepManifest":
        manifest = None
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec["kind"] == "header":
                    manifest = cls(
                        dataset_name=rec["dataset_name"],
                        created_at=rec["created_at"],
                        master_seed=rec["master_seed"],
                    )
                elif rec["kind"] == "warning":
                    manifest.warnings.append(rec["message"])
                elif rec["kind"] == "entry":
                    manifest.entries.append(ManifestEntry.from_dict(rec))
        if manifest is None:
            raise ValueError(f"{path}: no manifest header record")
        return manifest


def _divisible(img: ImageBuffer, spec: sp.TransformSpec) -> bool:
    if spec.block_size is None:
        return True
    return img.width % spec.block_size == 0 and img.height % spec.block_size == 0


def apply_sweep(
    input_dir,
    out_dir,
    master_seed: int,
    sweep: list[sp.TransformSpec] | None = None,
    dataset_name: str | None = None,
) -> SweepManifest:
    """Apply every spec to every image under input_dir; write outputs and
    the manifest (out_dir/manifest.jsonl).

    Rerunning with the same master seed reproduces every output byte for
    byte.  Specs whose block size does not divide an image's dimensions
    are skipped for that image with a recorded warning; I/O failures abort
    that job, not the sweep.
    """
    input_dir = Path(input_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep = list(sweep) if sweep is not None else sp.full_sweep()

    sources = sorted(
        p for p in input_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not sources:
        raise ValueError(f"{input_dir}: no decodable images found")

    manifest = SweepManifest(
        dataset_name=dataset_name or input_dir.name,
        created_at=datetime.now(timezone.utc).isoformat(),
        master_seed=master_seed,
    )
    for source in sources:
        try:
            img = load_image(source)
        except Exception as exc:  # job aborts, sweep continues
            manifest.warnings.append(f"{source.name}: load failed: {exc}")
            continue
        seg_cache: dict[int, SegmentationMap] = {}
        for spec in sweep:
            if not _divisible(img, spec):
                manifest.warnings.append(
                    f"{source.name}: skipped {spec.canonical()} "
                    f"(block does not divide {img.width}x{img.height})"
                )
                continue
            seed = derive_job_seed(master_seed, source.name, spec)
            segmentation = None
            if spec.segments is not None:
                if spec.segments not in seg_cache:
                    seg_cache[spec.segments] = slic_segment(img, spec.segments)
                segmentation = seg_cache[spec.segments]
            try:
                result = apply_transform(img, spec, Rng(seed), segmentation)
                out_name = f"{source.stem}__{spec.slug()}.png"
                save_image(result.image, out_dir / out_name)
                raw_path = None
                if result.flattened is not None:
                    raw_name = f"{source.stem}__{spec.slug()}.xitf"
                    write_planar(result.flattened, out_dir / raw_name)
                    raw_path = raw_name
            except Exception as exc:
                manifest.warnings.append(
                    f"{source.name}: {spec.canonical()} failed: {exc}"
                )
                continue
            manifest.entries.append(
                ManifestEntry(
                    source_path=source.name,
                    spec=spec,
                    seed=seed,
                    output_path=out_name,
                    raw_path=raw_path,
                    actual_segments=result.actual_segments,
                )
            )
    manifest.write(out_dir / "manifest.jsonl")
    return manifest


# -- study set ----------------------------------------------------------------

TEST_ITEMS_PER_SPEC = 3
PRACTICE_TRIALS = 11

# practice composition (one per transform family plus extra baselines and
# probability variants); the actual composition used in the original study
# was never published, so this is a documented local choice
PRACTICE_SPECS = (
    sp.TransformSpec(sp.BASELINE),
    sp.TransformSpec(sp.BASELINE),
    sp.TransformSpec(sp.FULL_RANDOM, probability=0.5),
    sp.TransformSpec(sp.FULL_RANDOM, probability=1.0),
    sp.TransformSpec(sp.GRID, block_size=40),
    sp.TransformSpec(sp.WITHIN_GRID, block_size=40, probability=0.5),
    sp.TransformSpec(sp.WITHIN_GRID, block_size=160, probability=1.0),
    sp.TransformSpec(sp.LOCAL_STRUCTURE, block_size=40, probability=0.5),
    sp.TransformSpec(sp.COLOR_FLATTEN),
    sp.TransformSpec(sp.SEG_WITHIN, segments=16, probability=0.5),
    sp.TransformSpec(sp.SEG_DISPLACEMENT, segments=16),
)


@dataclass(frozen=True)
class StudyItem:
    item_id: str
    image_path: str
    spec: sp.TransformSpec
    true_class: str

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "image_path": self.image_path,
            "spec": self.spec.to_dict(),
            "true_class": self.true_class,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StudyItem":
        return cls(
            item_id=d["item_id"],
            image_path=d["image_path"],
            spec=sp.TransformSpec.from_dict(d["spec"]),
            true_class=d["true_class"],
        )


@dataclass
class StudySet:
    classes: tuple[str, ...]
    items: list[StudyItem]  # test items, 3 per spec
    practice: list[StudyItem]

    def validate(self) -> None:
        if len(self.classes) != 10:
            raise ValueError(f"need exactly 10 classes, got {len(self.classes)}")
        per_spec: dict[str, int] = {}
        for item in self.items:
            per_spec[item.spec.canonical()] = per_spec.get(item.spec.canonical(), 0) + 1
            if item.true_class not in self.classes:
                raise ValueError(f"{item.item_id}: class {item.true_class!r} not in class list")
        bad = {k: v for k, v in per_spec.items() if v != TEST_ITEMS_PER_SPEC}
        if bad:
            raise ValueError(f"expected {TEST_ITEMS_PER_SPEC} items per spec, got {bad}")
        if len(self.items) != TEST_ITEMS_PER_SPEC * len(per_spec):
            raise ValueError("item count mismatch")
        if len(self.practice) != PRACTICE_TRIALS:
            raise ValueError(f"need {PRACTICE_TRIALS} practice items, got {len(self.practice)}")
        ids = [i.item_id for i in self.items + self.practice]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate item ids")

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": list(self.classes),
                "items": [i.to_dict() for i in self.items],
                "practice": [i.to_dict() for i in self.practice],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "StudySet":
        d = json.loads(text)
        out = cls(
            classes=tuple(d["classes"]),
            items=[StudyItem.from_dict(i) for i in d["items"]],
            practice=[StudyItem.from_dict(i) for i in d["practice"]],
        )
        out.validate()
        return out

    @classmethod
    def load(cls, path) -> "StudySet":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def load_labels(path) -> dict[str, str]:
    """Read a labels CSV with columns path,class."""
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            labels[rec["path"]] = rec["class"]
    return labels


def sample_study_set(
    manifest: SweepManifest,
    labels: dict[str, str],
    rng: Rng,
    sweep: list[sp.TransformSpec] | None = None,
) -> StudySet:
    """Sample 3 items per spec (without replacement over source images,
    uniformly, no class balancing) plus the practice items.

    Practice sources prefer images unused by any test item, so no rendered
    stimulus repeats within a session; every (source, spec) pair is used at
    most once regardless.
    """
    sweep = list(sweep) if sweep is not None else sp.full_sweep()
    classes = tuple(sorted(set(labels.values())))
    by_spec: dict[str, list[ManifestEntry]] = {}
    for entry in manifest.entries:
        by_spec.setdefault(entry.spec.canonical(), []).append(entry)

    items: list[StudyItem] = []
    used_pairs: set[tuple[str, str]] = set()
    test_sources: set[str] = set()
    for spec in sweep:
        pool = by_spec.get(spec.canonical(), [])
        if len(pool) < TEST_ITEMS_PER_SPEC:
            raise ValueError(
                f"need at least {TEST_ITEMS_PER_SPEC} source images for "
                f"{spec.canonical()}, have {len(pool)}"
            )
        chosen = fisher_yates(pool, rng)[:TEST_ITEMS_PER_SPEC]
        for entry in chosen:
            if entry.source_path not in labels:
                raise ValueError(f"no class label for source {entry.source_path!r}")
            items.append(
                StudyItem(
                    item_id=f"t{len(items):03d}-{spec.slug()}",
                    image_path=entry.output_path,
                    spec=spec,
                    true_class=labels[entry.source_path],
                )
            )
            used_pairs.add((entry.source_path, spec.canonical()))
            test_sources.add(entry.source_path)

    practice: list[StudyItem] = []
    for n, spec in enumerate(PRACTICE_SPECS):
        pool = [
            e
            for e in by_spec.get(spec.canonical(), [])
            if (e.source_path, spec.canonical()) not in used_pairs
        ]
        if not pool:
            raise ValueError(f"no unused source available for practice {spec.canonical()}")
        fresh = [e for e in pool if e.source_path not in test_sources]
        pool = fresh if fresh else pool
        entry = pool[rng.below(len(pool))]
        practice.append(
            StudyItem(
                item_id=f"p{n:02d}-{spec.slug()}",
                image_path=entry.output_path,
                spec=spec,
                true_class=labels[entry.source_path],
            )
        )
        used_pairs.add((entry.source_path, spec.canonical()))

    study = StudySet(classes=classes, items=items, practice=practice)
    study.validate()
    return study
