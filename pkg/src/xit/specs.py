"""Transform specifications and the full parameter sweep.

A TransformSpec names one point in the three-variable parameter space
(block size / segment count, shuffle probability, whether blocks or
regions move).  Exactly the fields relevant to the kind may be set.

The canonical string form (kind plus sorted short params) is used for
seed derivation, manifests and the response CSV, so it must stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass

BASELINE = "baseline"
FULL_RANDOM = "full_random"
GRID = "grid"
WITHIN_GRID = "within_grid"
LOCAL_STRUCTURE = "local_structure"
COLOR_FLATTEN = "color_flatten"
SEG_WITHIN = "seg_within"
SEG_DISPLACEMENT = "seg_displacement"

# canonical ordering, also the tie-break order for rankings
KINDS = (
    BASELINE,
    FULL_RANDOM,
    GRID,
    WITHIN_GRID,
    LOCAL_STRUCTURE,
    COLOR_FLATTEN,
    SEG_WITHIN,
    SEG_DISPLACEMENT,
)

# which fields each kind uses: (block_size, probability, segments)
_FIELDS = {
    BASELINE: (False, False, False),
    FULL_RANDOM: (False, True, False),
    GRID: (True, False, False),
    WITHIN_GRID: (True, True, False),
    LOCAL_STRUCTURE: (True, True, False),
    COLOR_FLATTEN: (False, False, False),
    SEG_WITHIN: (False, True, True),
    SEG_DISPLACEMENT: (False, False, True),
}

SWEEP_BLOCK_SIZES = (20, 40, 80, 160)
SWEEP_BLOCK_PROBS = (0.5, 1.0)
SWEEP_RANDOM_PROBS = (0.5, 0.8, 1.0)
SWEEP_SEGMENTS = (8, 16, 64)


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    block_size: int | None = None
    probability: float | None = None
    segments: int | None = None

    def __post_init__(self):
        if self.kind not in _FIELDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        wants_block, wants_prob, wants_seg = _FIELDS[self.kind]
        for wanted, value, name in (
            (wants_block, self.block_size, "block_size"),
            (wants_prob, self.probability, "probability"),
            (wants_seg, self.segments, "segments"),
        ):
            if wanted and value is None:
                raise ValueError(f"{self.kind} requires {name}")
            if not wanted and value is not None:
                raise ValueError(f"{self.kind} does not take {name}")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be positive")
        if self.probability is not None and not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")
        if self.segments is not None and self.segments < 1:
            raise ValueError("segments must be positive")

    def canonical(self) -> str:
        """Stable string form, e.g. 'within_grid:b=40,p=0.5'."""
        parts = []
        if self.block_size is not None:
            parts.append(f"b={self.block_size}")
        if self.probability is not None:
            parts.append(f"p={self.probability:g}")
        if self.segments is not None:
            parts.append(f"k={self.segments}")
        return self.kind if not parts else f"{self.kind}:{','.join(parts)}"

    def slug(self) -> str:
        """Filesystem-safe form of canonical(), e.g. 'within_grid_b40_p0.5'."""
        return self.canonical().replace(":", "_").replace(",", "_").replace("=", "")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.block_size is not None:
            d["block_size"] = self.block_size
        if self.probability is not None:
            d["probability"] = self.probability
        if self.segments is not None:
            d["segments"] = self.segments
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransformSpec":
        return cls(
            kind=d["kind"],
            block_size=d.get("block_size"),
            probability=d.get("probability"),
            segments=d.get("segments"),
        )

    @classmethod
    def parse(cls, text: str) -> "TransformSpec":
        """Inverse of canonical()."""
        kind, _, rest = text.partition(":")
        kwargs = {}
        if rest:
            for part in rest.split(","):
                key, _, value = part.partition("=")
                if key == "b":
                    kwargs["block_size"] = int(value)
                elif key == "p":
                    kwargs["probability"] = float(value)
                elif key == "k":
                    kwargs["segments"] = int(value)
                else:
                    raise ValueError(f"bad spec string {text!r}")
        return cls(kind=kind, **kwargs)


def full_sweep() -> list[TransformSpec]:
    """The full 34-spec parameter sweep, in canonical order.

    1 baseline + 3 full-random + 4 grid + 8 within-grid + 8 local-structure
    (23 block transforms) + 1 color-flatten + 6 seg-within + 3
    seg-displacement (9 segmentation transforms).
    """
    specs = [TransformSpec(BASELINE)]
    specs += [TransformSpec(FULL_RANDOM, probability=p) for p in SWEEP_RANDOM_PROBS]
    specs += [TransformSpec(GRID, block_size=b) for b in SWEEP_BLOCK_SIZES]
    for kind in (WITHIN_GRID, LOCAL_STRUCTURE):
        for p in SWEEP_BLOCK_PROBS:
            specs += [
                TransformSpec(kind, block_size=b, probability=p)
                for b in SWEEP_BLOCK_SIZES
            ]
    specs.append(TransformSpec(COLOR_FLATTEN))
    for p in SWEEP_BLOCK_PROBS:
        specs += [TransformSpec(SEG_WITHIN, segments=k, probability=p) for k in SWEEP_SEGMENTS]
    specs += [TransformSpec(SEG_DISPLACEMENT, segments=k) for k in SWEEP_SEGMENTS]
    return specs
