"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.

Three criteria (C4, C5, C6) assert verbatim agreement between statistics
computed from the bundled accuracy fixtures and the bundled reference
statistics tables.  The reference tables are internally inconsistent for a
subset of entries (they cannot be derived from the accuracy fixtures under
any standard test mode; the reconcilable majority is locked down in
tests/test_stats.py against an independent oracle).  Those three tests
assert every entry anyway, so they fail on the inconsistent subset by
design rather than silently loosening tolerances.
"""

import hashlib
import json
import threading
import time
from fractions import Fraction
from urllib import request

import numpy as np
import pytest
from click.testing import CliRunner

from xit import ImageBuffer, Rng
from xit.cli import main as cli_main
from xit.fixtures import (
    NETWORKS,
    load_reference_ranking,
    load_reference_stats,
    ranking_response_table,
    study_vectors,
)
from xit.segment import segmentation_displacement_shuffle, segmentation_within_shuffle
from xit.slic import SegmentationMap, slic_segment
from xit.specs import FULL_RANDOM, GRID, LOCAL_STRUCTURE, SEG_WITHIN, WITHIN_GRID, full_sweep
from xit.stats import HUMAN, difficulty_ranking, mad_filter, ols, pearson, t_test
from xit.sweep import sample_study_set, load_labels, SweepManifest
from xit.transforms import (
    full_random_shuffle,
    grid_shuffle,
    local_structure_shuffle,
    within_grid_shuffle,
)

from conftest import noise_image, packed_pixels, smooth_image
from test_slic import assert_regions_4connected


def report(cid: str, name: str, ok: bool, detail: str = "") -> None:
    line = f"[{cid}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)


# -- C1: multiset preservation over every sweep parameter ------------------------------

def _sizes_for_block(b: int, trials: int) -> list[int]:
    if b >= 160:
        sizes = [b] * trials
    else:
        sizes = [b if t % 2 == 0 else 2 * b for t in range(trials)]
    for t in (50, 150):  # keep the full 320 size in every parameter's mix
        if t < trials:
            sizes[t] = 320
    return sizes


def test_c01_multiset_preservation():
    trials = 200
    start = time.monotonic()
    checked = 0
    for spec in full_sweep():
        if spec.kind == FULL_RANDOM:
            sizes = [(4, 8, 16, 32)[t % 4] for t in range(trials)]
            sizes[50] = sizes[150] = 320
            apply = lambda img, rng, s=spec: full_random_shuffle(img, s.probability, rng)
        elif spec.kind == GRID:
            sizes = _sizes_for_block(spec.block_size, trials)
            apply = lambda img, rng, s=spec: grid_shuffle(img, s.block_size, rng)
        elif spec.kind == WITHIN_GRID:
            sizes = _sizes_for_block(spec.block_size, trials)
            apply = lambda img, rng, s=spec: within_grid_shuffle(
                img, s.block_size, s.probability, rng
            )
        elif spec.kind == LOCAL_STRUCTURE:
            sizes = _sizes_for_block(spec.block_size, trials)
            apply = lambda img, rng, s=spec: local_structure_shuffle(
                img, s.block_size, s.probability, rng
            )
        elif spec.kind == SEG_WITHIN:
            sizes = [(16, 32)[t % 2] for t in range(trials)]
            sizes[50] = 320
            apply = lambda img, rng, s=spec: segmentation_within_shuffle(
                img, s.segments, s.probability, rng
            )
        else:
            continue  # baseline, color flatten and displacement not in this criterion
        for t, size in enumerate(sizes):
            seed = 10_000 + checked + t
            if size >= 320 and spec.kind == SEG_WITHIN:
                img = smooth_image(seed, size)  # photo-like content for segmentation
            else:
                img = noise_image(seed, size)
            out = apply(img, Rng(seed))
            assert np.array_equal(packed_pixels(out), packed_pixels(img)), (
                spec.canonical(),
                size,
                seed,
            )
        checked += trials
    elapsed = time.monotonic() - start
    ok = elapsed < 120.0
    report(
        "C1",
        "multiset preservation",
        ok,
        f"{checked} trials across 29 parameters in {elapsed:.1f}s",
    )
    assert checked == 29 * trials
    assert ok, f"runtime {elapsed:.1f}s exceeds 2 minutes"


# -- C2: sweep determinism ---------------------------------------------------------------

def test_c02_sweep_determinism(corpus_dir, tmp_path):
    runner = CliRunner()
    start = time.monotonic()
    digests = []
    for run in ("one", "two"):
        out_dir = tmp_path / run
        result = runner.invoke(
            cli_main,
            ["sweep", "--input", str(corpus_dir), "--output", str(out_dir), "--seed", "42"],
        )
        assert result.exit_code == 0, result.output
        manifest = SweepManifest.read(out_dir / "manifest.jsonl")
        assert len(manifest.entries) == 340
        digest = {
            e.output_path: hashlib.sha256((out_dir / e.output_path).read_bytes()).hexdigest()
            for e in manifest.entries
        }
        for e in manifest.entries:  # raw flatten planes too
            if e.raw_path:
                digest[e.raw_path] = hashlib.sha256(
                    (out_dir / e.raw_path).read_bytes()
                ).hexdigest()
        digests.append(digest)
    elapsed = time.monotonic() - start
    identical = digests[0] == digests[1]
    ok = identical and elapsed < 120.0
    report(
        "C2",
        "sweep determinism",
        ok,
        f"340 outputs x 2 runs byte-identical={identical} in {elapsed:.1f}s",
    )
    assert identical
    assert elapsed < 120.0, f"runtime {elapsed:.1f}s exceeds 2 minutes"


# -- C3: sweep cardinality ------------------------------------------------------------------

def test_c03_sweep_cardinality(sweep_result, corpus_dir):
    sweep = full_sweep()
    by_kind = {}
    for spec in sweep:
        by_kind[spec.kind] = by_kind.get(spec.kind, 0) + 1
    block = sum(by_kind[k] for k in ("full_random", "grid", "within_grid", "local_structure"))
    seg = by_kind["seg_within"] + by_kind["seg_displacement"]
    _, manifest = sweep_result
    study = sample_study_set(manifest, load_labels(corpus_dir / "labels.csv"), Rng(7))
    ok = (
        len(sweep) == 34
        and block == 23
        and seg == 9
        and by_kind["baseline"] == 1
        and by_kind["color_flatten"] == 1
        and len(study.items) == 102
    )
    report(
        "C3",
        "sweep cardinality",
        ok,
        f"{len(sweep)} specs = {block} block + {seg} seg + baseline + flatten; "
        f"study set {len(study.items)} items",
    )
    assert ok


# -- C4: reference correlations ----------------------------------------------------------------

def _group_vectors(group):
    specs, vectors = study_vectors()
    idx = [i for i, s in enumerate(specs) if group == "all" or s.kind == group]
    return (
        [vectors[HUMAN][i] for i in idx],
        {net: [vectors[net][i] for i in idx] for net in NETWORKS},
    )


def test_c04_reference_correlations():
    mismatches = []
    total = 0
    for ref in load_reference_stats():
        human, nets = _group_vectors(ref.group)
        r = pearson(human, nets[ref.network])
        total += 1
        if abs(r - ref.r) > 0.02:
            mismatches.append(
                f"{ref.group}/{ref.network}: computed r={r:+.4f}, reference {ref.r:+.2f}"
            )
    ok = not mismatches
    report("C4", "reference correlations", ok, f"{total - len(mismatches)}/{total} within ±0.02")
    assert ok, (
        "correlation entries not derivable from the bundled accuracy fixtures "
        "(see decisions ledger):\n" + "\n".join(mismatches)
    )


# -- C5: reference t statistics -------------------------------------------------------------------

def test_c05_reference_t_statistics():
    t_bad, p_bad = [], []
    total = 0
    for ref in load_reference_stats():
        human, nets = _group_vectors(ref.group)
        res = t_test(nets[ref.network], human)  # frozen default mode
        total += 1
        if abs(res.t - ref.t) > 0.02:
            t_bad.append(
                f"{ref.group}/{ref.network}: computed t={res.t:+.4f}, reference {ref.t:+.2f}"
            )
        if abs(res.p - ref.p) > 0.005:
            p_bad.append(
                f"{ref.group}/{ref.network}: computed p={res.p:.4f}, reference {ref.p:.4f}"
            )
    ok = not t_bad and not p_bad
    report(
        "C5",
        "reference t statistics (two_sample_welch)",
        ok,
        f"t {total - len(t_bad)}/{total} within ±0.02, p {total - len(p_bad)}/{total} within ±0.005",
    )
    assert ok, (
        "t-test entries not derivable from the bundled accuracy fixtures "
        "(see decisions ledger):\n" + "\n".join(t_bad + p_bad)
    )


# -- C6: reference ranking ---------------------------------------------------------------------------

def test_c06_reference_ranking():
    rows = difficulty_ranking(ranking_response_table(), level="transform")
    computed = {}
    for row in rows:
        subject = row.subject.removeprefix("model:")
        computed.setdefault(subject, {})[row.key] = row.rank
    reference = load_reference_ranking()

    anchors_ok = (
        computed[HUMAN]["color_flatten"] == 8
        and computed["resnet50"]["color_flatten"] == 3
    )
    mismatches = []
    for subject, ref_ranks in reference.items():
        for kind, ref_rank in ref_ranks.items():
            got = computed[subject][kind]
            if got != ref_rank:
                mismatches.append(f"{subject}/{kind}: computed {got}, reference {ref_rank}")
    ok = anchors_ok and not mismatches
    report(
        "C6",
        "reference ranking columns",
        ok,
        f"anchors(human CF=8, resnet50 CF=3)={'ok' if anchors_ok else 'BAD'}, "
        f"{32 - len(mismatches)}/32 column entries exact",
    )
    assert anchors_ok, "named anchor ranks failed"
    assert ok, (
        "rank columns not reproducible from the accuracy tables (the reference "
        "resnet101 column is not even a permutation; see decisions ledger):\n"
        + "\n".join(mismatches)
    )


# -- C7: OLS oracle ------------------------------------------------------------------------------------

def _exact_normal_equations(y, X):
    Xf = [[Fraction(v) for v in row] for row in X.tolist()]
    yf = [Fraction(v) for v in y.tolist()]
    k = len(Xf[0])
    ata = [[sum(r[i] * r[j] for r in Xf) for j in range(k)] for i in range(k)]
    aty = [sum(r[i] * v for r, v in zip(Xf, yf)) for i in range(k)]
    m = [row[:] + [b] for row, b in zip(ata, aty)]
    for col in range(k):
        pivot = max(range(col, k), key=lambda r: abs(m[r][col]))
        m[col], m[pivot] = m[pivot], m[col]
        for r in range(col + 1, k):
            f = m[r][col] / m[col][col]
            m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    beta = [Fraction(0)] * k
    for r in range(k - 1, -1, -1):
        beta[r] = (m[r][k] - sum(m[r][c] * beta[c] for c in range(r + 1, k))) / m[r][r]
    return np.array([float(b) for b in beta])


REPORT_FIELDS = (
    "r2_uncentered",
    "adj_r2_uncentered",
    "f_stat",
    "log_likelihood",
    "aic",
    "bic",
    "durbin_watson",
    "jarque_bera",
    "skew",
    "kurtosis",
    "cond_number",
    "n_obs",
    "df_resid",
)


def test_c07_ols_oracle():
    rng = np.random.default_rng(20240517)
    problems = 0
    worst_rel = 0.0
    worst_orth = 0.0
    while problems < 100:
        X = rng.normal(size=(34, 4))
        sv = np.linalg.svd(X, compute_uv=False)
        if sv[0] / sv[-1] >= 1e6:
            continue
        y = rng.normal(size=34)
        rep = ols(y, X)
        oracle = _exact_normal_equations(y, X)
        rel = np.max(np.abs(rep.coef - oracle) / np.maximum(np.abs(oracle), 1e-30))
        orth = np.max(np.abs(X.T @ rep.residuals)) / np.linalg.norm(y)
        worst_rel = max(worst_rel, rel)
        worst_orth = max(worst_orth, orth)
        assert rel <= 1e-8, f"problem {problems}: coefficient error {rel:.2e}"
        assert orth <= 1e-8, f"problem {problems}: residual orthogonality {orth:.2e}"
        problems += 1
    d = rep.to_dict()
    fields_ok = all(f in d for f in REPORT_FIELDS) and all(
        set(r) == {"name", "coef", "std_err", "t", "p", "ci_low", "ci_high"}
        for r in d["regressors"]
    )
    ok = fields_ok
    report(
        "C7",
        "OLS vs normal-equations oracle",
        ok,
        f"100 problems, worst rel err {worst_rel:.1e}, worst orthogonality {worst_orth:.1e}",
    )
    assert fields_ok


# -- C8: SLIC sanity --------------------------------------------------------------------------------------

def test_c08_slic_sanity():
    start = time.monotonic()
    img = smooth_image(31, 320)
    uniform = ImageBuffer(np.full((320, 320, 3), 99, dtype=np.uint8))
    details = []
    for k in (8, 16, 64):
        seg = slic_segment(img, k)
        counts = np.bincount(seg.labels.reshape(-1), minlength=seg.region_count)
        assert counts.min() >= 1
        assert seg.labels.min() == 0 and seg.labels.max() == seg.region_count - 1
        assert_regions_4connected(seg.labels)
        assert 0.5 * k <= seg.region_count <= 2 * k, (k, seg.region_count)
        useg = slic_segment(uniform, k)
        sizes = useg.region_sizes()
        target = 320 * 320 / k
        assert sizes.min() >= 0.8 * target, (k, sizes.min())
        assert sizes.max() <= 1.2 * target, (k, sizes.max())
        details.append(f"k={k}: K={seg.region_count}, uniform areas {sizes.min()}..{sizes.max()}")
    elapsed = time.monotonic() - start
    ok = elapsed < 30.0
    report("C8", "SLIC sanity", ok, "; ".join(details) + f"; {elapsed:.1f}s")
    assert ok, f"runtime {elapsed:.1f}s exceeds 30s"


# -- C9: displacement containment ----------------------------------------------------------------------------

def test_c09_displacement_containment():
    trials = 1000
    for t in range(trials):
        size = (8, 12, 16, 24, 32)[t % 5]
        k = (2, 3, 4, 6)[t % 4]
        img = noise_image(50_000 + t, size)
        out = segmentation_displacement_shuffle(img, k, Rng(50_000 + t))
        assert out.pixels.shape == img.pixels.shape
        in_vals = np.unique(packed_pixels(img))
        out_vals = np.unique(packed_pixels(out))
        assert np.isin(out_vals, in_vals).all(), t
    # equal-sized synthetic regions preserve the global multiset exactly
    img = noise_image(123, 16)
    labels = np.zeros((16, 16), dtype=np.int32)
    labels[8:, :] = 1
    seg = SegmentationMap(width=16, height=16, labels=labels, region_count=2)
    out = segmentation_displacement_shuffle(img, 2, Rng(9), segmentation=seg)
    exact = np.array_equal(packed_pixels(out), packed_pixels(img))
    report("C9", "displacement containment", exact, f"{trials} trials + equal-region exactness")
    assert exact


# -- C10: MAD filter ------------------------------------------------------------------------------------------

def test_c10_mad_filter():
    retained = mad_filter({"s1": 5, "s2": 6, "s3": 7, "s4": 8, "s5": 100})
    fixture_ok = retained == ["s2", "s3", "s4", "s5"]
    scale_ok = True
    rng = np.random.default_rng(17)
    for _ in range(200):
        values = rng.uniform(0.5, 100.0, size=rng.integers(3, 25)).tolist()
        scale = float(rng.uniform(0.01, 1000.0))
        if mad_filter(values) != mad_filter([v * scale for v in values]):
            scale_ok = False
            break
    ok = fixture_ok and scale_ok
    report("C10", "MAD filter", ok, f"fixture retained {retained}; scale-invariant={scale_ok}")
    assert ok


# -- C11: service protocol -----------------------------------------------------------------------------------

def _http(base, method, path, payload=None):
    req = request.Request(base + path, method=method)
    data = None
    if payload is not None:
        data = json.dumps(payload).encode()
        req.add_header("Content-Type", "application/json")
    with request.urlopen(req, data=data) as resp:
        body = resp.read()
        ctype = resp.headers.get("Content-Type", "")
        return json.loads(body) if ctype.startswith("application/json") else body


def test_c11_service_protocol(tmp_path):
    from xit.service import make_server
    from xit.sweep import PRACTICE_SPECS, StudyItem, StudySet
    from xit import save_image

    images = tmp_path / "imgs"
    images.mkdir()
    save_image(noise_image(3, 4), images / "x.png")
    classes = tuple(f"class{i}" for i in range(10))
    items = [
        StudyItem(f"t{i * 3 + j:03d}-{spec.slug()}", "x.png", spec, classes[(i + j) % 10])
        for i, spec in enumerate(full_sweep())
        for j in range(3)
    ]
    practice = [
        StudyItem(f"p{n:02d}-{spec.slug()}", "x.png", spec, classes[0])
        for n, spec in enumerate(PRACTICE_SPECS)
    ]
    study = StudySet(classes=classes, items=items, practice=practice)

    server = make_server(study, tmp_path / "data", images, port=0)
    base = f"http://127.0.0.1:{server.server_address[1]}"
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        sess = _http(base, "POST", "/v1/sessions", {"participant_id": "scripted", "seed": 7})
        sid = sess["session_id"]
        feedback_practice = feedback_test = 0
        rest_indices = []
        for n in range(113):
            view = _http(base, "GET", f"/v1/sessions/{sid}/trials/{n}")
            if view["show_rest"]:
                rest_indices.append(view["phase_index"])
            ack = _http(
                base,
                "POST",
                f"/v1/sessions/{sid}/trials/{n}/response",
                {"choice": view["class_options"][0], "confidence": 3, "rt_ms": 200.0 + n},
            )
            if view["phase"] == "practice":
                feedback_practice += "feedback" in ack
            else:
                feedback_test += "feedback" in ack
        csv_bytes = _http(base, "GET", "/v1/export.csv")
    finally:
        server.shutdown()

    csv_path = tmp_path / "responses.csv"
    csv_path.write_bytes(bytes(csv_bytes))
    rows = csv_path.read_text().strip().split("\n")
    export_ok = len(rows) - 1 == 113

    report_path = tmp_path / "report.json"
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "stats",
            "--responses",
            str(csv_path),
            "--report",
            str(report_path),
            "--no-filter",
        ],
    )
    stats_ok = result.exit_code == 0 and report_path.exists()
    stats_report = json.loads(report_path.read_text()) if stats_ok else {}
    stats_ok = stats_ok and {"pearson", "ttest", "ols", "ranking"} <= set(stats_report)

    ok = (
        feedback_practice == 11
        and feedback_test == 0
        and rest_indices == [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
        and export_ok
        and stats_ok
    )
    report(
        "C11",
        "service protocol",
        ok,
        f"feedback practice={feedback_practice}/11 test={feedback_test}/102, "
        f"rest at {rest_indices}, export rows={len(rows) - 1}, stats={'ok' if stats_ok else 'BAD'}",
    )
    assert ok, result.output if not stats_ok else "protocol assertions failed"
