"""Bundled reference tables.

Four CSVs ship with the package:

- study_accuracy.csv: accuracy (percent) per transform spec for the human
  study sample, for humans and the three reference networks evaluated on
  the same images.
- network_test_accuracy.csv: the networks' full test-set accuracy per spec.
- reference_stats.csv: reference t statistics, p-values and Pearson
  correlations between human and network responses, per transform group.
- reference_ranking.csv: reference transform-level difficulty ranks per
  subject.

The merged response table used for ranking takes human rows from the study
sample and network rows from the full test-set table (the networks'
transform-level performance is defined over their whole test set, not the
102-image sample).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

from .specs import TransformSpec
from .stats import HUMAN, ResponseRow

NETWORKS = ("resnet50", "resnet101", "vone")
STAT_GROUPS = (
    "all",
    "full_random",
    "grid",
    "within_grid",
    "local_structure",
    "seg_displacement",
    "seg_within",
)


def _read_csv(name: str) -> list[dict[str, str]]:
    path = resources.files("xit.data").joinpath(name)
    with path.open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def load_study_accuracy() -> list[ResponseRow]:
    """Human + network accuracy on the study sample, one row per (spec, subject)."""
    rows: list[ResponseRow] = []
    for rec in _read_csv("study_accuracy.csv"):
        spec = TransformSpec.parse(rec["spec"])
        rows.append(ResponseRow(spec, HUMAN, float(rec["human"])))
        for net in NETWORKS:
            rows.append(ResponseRow(spec, f"model:{net}", float(rec[net])))
    return rows


def load_network_test_accuracy() -> list[ResponseRow]:
    """Network accuracy over the full test set, one row per (spec, network)."""
    rows: list[ResponseRow] = []
    for rec in _read_csv("network_test_accuracy.csv"):
        spec = TransformSpec.parse(rec["spec"])
        for net in NETWORKS:
            rows.append(ResponseRow(spec, f"model:{net}", float(rec[net])))
    return rows


def ranking_response_table() -> list[ResponseRow]:
    """Human study rows merged with network full-test-set rows."""
    rows = [r for r in load_study_accuracy() if r.subject == HUMAN]
    rows += load_network_test_accuracy()
    return rows


def study_vectors() -> tuple[list[TransformSpec], dict[str, list[float]]]:
    """Per-spec accuracy vectors (sweep order) for human and each network."""
    specs: list[TransformSpec] = []
    vectors: dict[str, list[float]] = {HUMAN: [], **{net: [] for net in NETWORKS}}
    for rec in _read_csv("study_accuracy.csv"):
        specs.append(TransformSpec.parse(rec["spec"]))
        vectors[HUMAN].append(float(rec["human"]))
        for net in NETWORKS:
            vectors[net].append(float(rec[net]))
    return specs, vectors


@dataclass(frozen=True)
class ReferenceStat:
    group: str  # "all" or a transform kind
    network: str
    t: float
    p: float
    r: float


def load_reference_stats() -> list[ReferenceStat]:
    return [
        ReferenceStat(
            group=rec["group"],
            network=rec["network"],
            t=float(rec["t"]),
            p=float(rec["p"]),
            r=float(rec["r"]),
        )
        for rec in _read_csv("reference_stats.csv")
    ]


def load_reference_ranking() -> dict[str, dict[str, int]]:
    """Reference transform-level ranks: subject -> kind -> rank."""
    out: dict[str, dict[str, int]] = {HUMAN: {}, **{net: {} for net in NETWORKS}}
    for rec in _read_csv("reference_ranking.csv"):
        kind = rec["kind"]
        out[HUMAN][kind] = int(rec["human"])
        for net in NETWORKS:
            out[net][kind] = int(rec[net])
    return out
