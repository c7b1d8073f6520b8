"""Command-line interface.

    xit apply          apply one transform to one image
    xit sweep          run the full parameter sweep over a corpus
    xit sample-study   sample the 102-item study set from a sweep manifest
    xit stats          analyze a responses CSV against the bundled tables
    xit serve          run the trial service
    xit segment-debug  export a segmentation label map + sidecar
"""

from __future__ import annotations

import csv
import json
import statistics
import sys
from pathlib import Path

import click

from . import specs as sp
from .fixtures import (
    NETWORKS,
    load_network_test_accuracy,
    study_vectors,
)
from .image import load_image, save_image
from .rng import Rng
from .slic import export_segmentation_debug, slic_segment
from .stats import (
    DEFAULT_T_MODE,
    HUMAN,
    T_TEST_MODES,
    ResponseRow,
    StatsError,
    difficulty_ranking,
    mad_filter,
    ols,
    pearson,
    t_test,
)
from .sweep import (
    SweepManifest,
    apply_sweep,
    apply_transform,
    derive_job_seed,
    load_labels,
    sample_study_set,
)


@click.group()
def main():
    """Extreme image transformation toolkit."""


@main.command("apply")
@click.option("--transform", "kind", required=True, type=click.Choice(sp.KINDS))
@click.option("--block", "block_size", type=int, default=None, help="block size in pixels")
@click.option("--prob", "probability", type=float, default=None, help="shuffle probability")
@click.option("--segments", type=int, default=None, help="requested superpixel count")
@click.option("--seed", type=int, required=True)
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
def apply_cmd(kind, block_size, probability, segments, seed, input_path, output_path):
    """Apply one transform to INPUT_PATH and write OUTPUT_PATH (PNG)."""
    spec = sp.TransformSpec(
        kind=kind, block_size=block_size, probability=probability, segments=segments
    )
    img = load_image(input_path)
    result = apply_transform(img, spec, Rng(seed))
    save_image(result.image, output_path)
    if result.flattened is not None:
        from .transforms import write_planar

        raw = Path(output_path).with_suffix(".xitf")
        write_planar(result.flattened, raw)
        click.echo(f"wrote {output_path} (+ raw planes {raw})")
    else:
        click.echo(f"wrote {output_path}")
    if result.actual_segments is not None:
        click.echo(f"actual segments: {result.actual_segments}")


@main.command("sweep")
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", "master_seed", type=int, required=True)
@click.option("--only", multiple=True, help="restrict to these canonical specs")
def sweep_cmd(input_dir, out_dir, master_seed, only):
    """Apply the full 34-spec sweep to every PNG under --input."""
    sweep = sp.full_sweep()
    if only:
        wanted = set(only)
        sweep = [s for s in sweep if s.canonical() in wanted]
        missing = wanted - {s.canonical() for s in sweep}
        if missing:
            raise click.BadParameter(f"unknown specs: {sorted(missing)}")
    manifest = apply_sweep(input_dir, out_dir, master_seed, sweep=sweep)
    click.echo(
        f"{len(manifest.entries)} outputs, {len(manifest.warnings)} warnings "
        f"-> {Path(out_dir) / 'manifest.jsonl'}"
    )
    for msg in manifest.warnings:
        click.echo(f"warning: {msg}", err=True)


@main.command("sample-study")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def sample_study_cmd(manifest_path, labels_path, seed, out_path):
    """Sample 3 images per spec (plus practice items) into a study-set JSON."""
    manifest = SweepManifest.read(manifest_path)
    labels = load_labels(labels_path)
    study = sample_study_set(manifest, labels, Rng(seed))
    study.save(out_path)
    click.echo(
        f"{len(study.items)} test items + {len(study.practice)} practice items -> {out_path}"
    )


@main.command("segment-debug")
@click.option("--segments", type=int, required=True)
@click.option("--compactness", type=float, default=10.0, show_default=True)
@click.option("--iterations", type=int, default=10, show_default=True)
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_png", type=click.Path(dir_okay=False))
def segment_debug_cmd(segments, compactness, iterations, input_path, output_png):
    """Segment INPUT_PATH and write the label PNG plus a JSON sidecar."""
    img = load_image(input_path)
    seg = slic_segment(img, segments, compactness, iterations)
    export_segmentation_debug(seg, output_png, segments, compactness, iterations)
    click.echo(f"{seg.region_count} regions -> {output_png}")


@main.command("serve")
@click.option("--study-set", "study_set_path", required=True, type=click.Path(exists=True),
              envvar="XIT_STUDY_SET")
@click.option("--data-dir", required=True, type=click.Path(file_okay=False), envvar="XIT_DATA_DIR")
@click.option("--images-dir", type=click.Path(file_okay=False), default=None,
              envvar="XIT_IMAGES_DIR",
              help="root for study-set image paths (default: study-set directory)")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="XIT_HOST")
@click.option("--port", type=int, default=8321, show_default=True, envvar="XIT_PORT")
@click.option("--static-dir", type=click.Path(file_okay=False), default=None,
              envvar="XIT_STATIC_DIR", help="serve a browser UI from this directory")
def serve_cmd(study_set_path, data_dir, images_dir, host, port, static_dir):
    """Run the psychophysics trial service."""
    from .service import make_server
    from .sweep import StudySet

    study = StudySet.load(study_set_path)
    images_root = images_dir or Path(study_set_path).parent
    server = make_server(
        study, data_dir, images_root, host=host, port=port,
        static_dir=static_dir, quiet=False,
    )
    click.echo(f"serving on http://{host}:{server.server_address[1]}/v1")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def _read_responses(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(rec)
    if not rows:
        raise click.ClickException("responses CSV is empty")
    return rows


@main.command("stats")
@click.option("--responses", "responses_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--tests", default="pearson,ttest,ols,rank", show_default=True,
              help="comma-separated subset of pearson,ttest,ols,rank")
@click.option("--t-mode", default=DEFAULT_T_MODE, show_default=True,
              type=click.Choice(T_TEST_MODES))
@click.option("--filter/--no-filter", "do_filter", default=True, show_default=True,
              help="drop subjects below median - 2*MAD of median rt")
def stats_cmd(responses_path, report_path, tests, t_mode, do_filter):
    """Analyze a responses CSV; correlations and t-tests compare the human
    accuracies against the bundled network reference tables."""
    wanted = {t.strip() for t in tests.split(",") if t.strip()}
    unknown = wanted - {"pearson", "ttest", "ols", "rank"}
    if unknown:
        raise click.BadParameter(f"unknown tests: {sorted(unknown)}")
    rows = _read_responses(responses_path)

    report = {"responses": responses_path, "n_rows": len(rows)}

    # participant filtering on median per-trial rt
    by_subject: dict[str, list[float]] = {}
    for rec in rows:
        by_subject.setdefault(rec["subject_id"], []).append(float(rec["rt_ms"]))
    medians = {sid: statistics.median(v) for sid, v in by_subject.items()}
    if do_filter:
        retained = set(mad_filter(medians))
    else:
        retained = set(medians)
    report["filtering"] = {
        "enabled": do_filter,
        "subjects": len(medians),
        "retained": sorted(retained),
        "excluded": sorted(set(medians) - retained),
    }
    rows = [r for r in rows if r["subject_id"] in retained]

    # per-spec human accuracy and confidence over retained rows
    per_spec: dict[str, list[tuple[int, int]]] = {}
    for rec in rows:
        per_spec.setdefault(rec["spec"], []).append(
            (int(rec["correct"]), int(rec["confidence"]))
        )
    accuracy = {
        spec: 100.0 * sum(c for c, _ in recs) / len(recs)
        for spec, recs in per_spec.items()
    }
    confidence = {
        spec: sum(conf for _, conf in recs) / len(recs) for spec, recs in per_spec.items()
    }
    report["accuracy"] = accuracy
    report["mean_confidence"] = confidence

    specs, vectors = study_vectors()
    common = [s for s in specs if s.canonical() in accuracy]
    human_vec = [accuracy[s.canonical()] for s in common]

    def groups():
        yield "all", list(range(len(common)))
        for kind in sp.KINDS:
            idx = [i for i, s in enumerate(common) if s.kind == kind]
            if len(idx) >= 2:
                yield kind, idx

    if "pearson" in wanted:
        result = {}
        for group, idx in groups():
            h = [human_vec[i] for i in idx]
            entry = {}
            for net in NETWORKS:
                nv = [vectors[net][specs.index(common[i])] for i in idx]
                try:
                    entry[net] = pearson(h, nv)
                except StatsError as exc:
                    entry[net] = f"undefined: {exc}"
            result[group] = entry
        report["pearson"] = result

    if "ttest" in wanted:
        result = {}
        for group, idx in groups():
            h = [human_vec[i] for i in idx]
            entry = {}
            for net in NETWORKS:
                nv = [vectors[net][specs.index(common[i])] for i in idx]
                try:
                    res = t_test(nv, h, mode=t_mode)
                    entry[net] = {"t": res.t, "p": res.p, "df": res.df, "mode": res.mode}
                except StatsError as exc:
                    entry[net] = f"undefined: {exc}"
            result[group] = entry
        report["ttest"] = result

    if "ols" in wanted:
        import numpy as np

        X = np.array(
            [[vectors[net][specs.index(s)] for net in NETWORKS] for s in common]
        )
        try:
            fit = ols(human_vec, X, names=list(NETWORKS))
            report["ols"] = fit.to_dict()
        except StatsError as exc:
            report["ols"] = f"undefined: {exc}"

    if "rank" in wanted:
        table = [
            ResponseRow(spec=s, subject=HUMAN, accuracy=accuracy[s.canonical()])
            for s in common
        ]
        table += load_network_test_accuracy()
        report["ranking"] = {
            level: [
                {
                    "subject": row.subject,
                    "key": row.key,
                    "mean_accuracy": row.mean_accuracy,
                    "difficulty": row.difficulty,
                    "rank": row.rank,
                }
                for row in difficulty_ranking(table, level=level)
            ]
            for level in ("transform", "parameter_pair")
        }

    Path(report_path).write_text(json.dumps(report, indent=2), encoding="utf-8")
    click.echo(f"report -> {report_path}")


if __name__ == "__main__":
    sys.exit(main())
