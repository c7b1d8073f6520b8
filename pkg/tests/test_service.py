"""Trial service: protocol sequencing, feedback rules, rest screens,
validation, durability, export and audit."""

import json
import threading
from urllib import error, request

import numpy as np
import pytest

from xit import ImageBuffer, save_image
from xit.service import StudyStore, make_server
from xit.specs import TransformSpec, full_sweep
from xit.sweep import PRACTICE_SPECS, StudyItem, StudySet


@pytest.fixture(scope="module")
def tiny_study(tmp_path_factory):
    """Synthetic study set over one 4x4 image (service doesn't care)."""
    root = tmp_path_factory.mktemp("study_imgs")
    save_image(ImageBuffer(np.zeros((4, 4, 3), dtype=np.uint8)), root / "x.png")
    classes = tuple(f"class{i}" for i in range(10))
    items = []
    for spec in full_sweep():
        for j in range(3):
            items.append(
                StudyItem(f"t{len(items):03d}-{spec.slug()}", "x.png", spec, classes[j % 10])
            )
    practice = [
        StudyItem(f"p{n:02d}-{spec.slug()}", "x.png", spec, classes[0])
        for n, spec in enumerate(PRACTICE_SPECS)
    ]
    study = StudySet(classes=classes, items=items, practice=practice)
    study.validate()
    return root, study


@pytest.fixture()
def store(tiny_study, tmp_path):
    _, study = tiny_study
    return StudyStore(study, tmp_path / "data")


def drive_session(store, participant="p1", seed=5, answer="true_class", rt=250.0):
    """Run a full 113-trial session; returns (session, trial views, acks)."""
    session = store.create_session(participant, seed=seed)
    views, acks = [], []
    for n in range(113):
        view = store.get_trial(session.session_id, n)
        choice = (
            session.trials[n].true_class
            if answer == "true_class"
            else next(c for c in view["class_options"] if c != session.trials[n].true_class)
        )
        ack = store.submit_response(session.session_id, n, choice, 3, rt)
        views.append(view)
        acks.append(ack)
    return session, views, acks


# -- session lifecycle ---------------------------------------------------------

def test_session_orders(store):
    a = store.create_session("pa", seed=1)
    b = store.create_session("pb", seed=2)
    assert len(a.trials) == 113
    assert a.practice_count == 11
    ids_a = [t.item_id for t in a.trials[11:]]
    ids_b = [t.item_id for t in b.trials[11:]]
    assert sorted(ids_a) == sorted(ids_b)  # same 102 images
    assert ids_a != ids_b  # different seeded orders
    # replaying the seed reproduces the order
    c = store.create_session("pc", seed=1)
    assert [t.item_id for t in c.trials] == [t.item_id for t in a.trials]
    # no image repeats within a session
    assert len({t.item_id for t in a.trials}) == 113


def test_duplicate_active_session_rejected(store):
    store.create_session("dup", seed=1)
    from xit.service import Conflict

    with pytest.raises(Conflict, match="active session"):
        store.create_session("dup", seed=2)


def test_new_session_allowed_after_completion(store):
    session, _, _ = drive_session(store, participant="again", seed=3)
    assert session.phase == "done"
    store.create_session("again", seed=4)  # no error


def test_options_are_permutations_of_classes(store):
    session = store.create_session("opt", seed=9)
    for options in session.option_orders:
        assert sorted(options) == sorted(store.study_set.classes)
    distinct = {tuple(o) for o in session.option_orders}
    assert len(distinct) > 1  # reshuffled per trial


# -- sequencing and protocol -----------------------------------------------------

def test_full_protocol_feedback_and_rest(store):
    session, views, acks = drive_session(store)
    assert [v["phase"] for v in views[:11]] == ["practice"] * 11
    assert [v["phase"] for v in views[11:]] == ["test"] * 102
    # feedback on every practice ack, never on test acks
    assert all("feedback" in a for a in acks[:11])
    assert all("feedback" not in a for a in acks[11:])
    # rest exactly when 10 test trials have been completed
    rest_points = [v["phase_index"] for v in views if v["show_rest"]]
    assert rest_points == [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
    assert session.phase == "done"


def test_practice_feedback_values(store):
    session = store.create_session("fb", seed=11)
    view = store.get_trial(session.session_id, 0)
    item = session.trials[0]
    wrong = next(c for c in view["class_options"] if c != item.true_class)
    ack = store.submit_response(session.session_id, 0, wrong, 2, 100.0)
    assert ack["feedback"] == "incorrect"
    view = store.get_trial(session.session_id, 1)
    ack = store.submit_response(session.session_id, 1, session.trials[1].true_class, 5, 90.0)
    assert ack["feedback"] == "correct"


def test_sequential_access_enforced(store):
    session = store.create_session("seq", seed=13)
    from xit.service import Conflict

    with pytest.raises(Conflict, match="sequential"):
        store.get_trial(session.session_id, 3)
    store.get_trial(session.session_id, 0)
    with pytest.raises(Conflict, match="sequential"):
        store.submit_response(session.session_id, 1, "class0", 3, 10.0)


def test_resubmission_rejected_and_record_unchanged(store):
    session = store.create_session("re", seed=17)
    store.get_trial(session.session_id, 0)
    first_choice = session.trials[0].true_class
    store.submit_response(session.session_id, 0, first_choice, 4, 50.0)
    from xit.service import Conflict

    other = next(c for c in store.study_set.classes if c != first_choice)
    with pytest.raises(Conflict, match="already"):
        store.submit_response(session.session_id, 0, other, 1, 1.0)
    assert session.records[0].choice == first_choice
    assert session.records[0].confidence == 4


def test_validation_errors(store):
    from xit.service import ValidationFailure

    session = store.create_session("val", seed=19)
    store.get_trial(session.session_id, 0)
    with pytest.raises(ValidationFailure, match="confidence"):
        store.submit_response(session.session_id, 0, session.trials[0].true_class, 6, 1.0)
    with pytest.raises(ValidationFailure, match="confidence"):
        store.submit_response(session.session_id, 0, session.trials[0].true_class, 0, 1.0)
    with pytest.raises(ValidationFailure, match="options"):
        store.submit_response(session.session_id, 0, "not-a-class", 3, 1.0)
    with pytest.raises(ValidationFailure):
        store.create_session("")


def test_negative_rt_flagged_but_stored(store):
    session = store.create_session("rt", seed=23)
    store.get_trial(session.session_id, 0)
    store.submit_response(session.session_id, 0, session.trials[0].true_class, 3, -5.0)
    record = session.records[0]
    assert record.rt_invalid
    assert record.rt_ms == -5.0


def test_server_rt_upper_bound(store):
    session = store.create_session("srv", seed=27)
    store.get_trial(session.session_id, 0)
    store.submit_response(session.session_id, 0, session.trials[0].true_class, 3, 123.0)
    assert session.records[0].server_rt_ms is not None
    assert session.records[0].server_rt_ms >= 0.0


# -- durability --------------------------------------------------------------------

def test_restart_restores_state(tiny_study, tmp_path):
    _, study = tiny_study
    data_dir = tmp_path / "data"
    store = StudyStore(study, data_dir)
    session = store.create_session("durable", seed=31)
    for n in range(25):
        store.get_trial(session.session_id, n)
        store.submit_response(session.session_id, n, session.trials[n].true_class, 3, 42.0)

    revived = StudyStore(study, data_dir)
    again = revived.sessions[session.session_id]
    assert again.cursor == 25
    assert again.phase == "test"
    assert [t.item_id for t in again.trials] == [t.item_id for t in session.trials]
    assert again.records[7].choice == session.records[7].choice
    # the revived store continues the session where it stopped
    view = revived.get_trial(session.session_id, 25)
    assert view["index"] == 25


def test_concurrent_sessions_do_not_interleave(store):
    # two participants hammering the store from separate threads complete
    # cleanly; per-session serialization keeps each sequence intact
    errors = []

    def run(participant, seed):
        try:
            drive_session(store, participant=participant, seed=seed)
        except Exception as exc:  # pragma: no cover - failure detail
            errors.append(exc)

    threads = [
        threading.Thread(target=run, args=(f"conc{i}", 100 + i)) for i in range(4)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    done = [s for s in store.sessions.values() if s.participant_id.startswith("conc")]
    assert len(done) == 4
    assert all(s.phase == "done" and len(s.records) == 113 for s in done)


def test_duplicate_submit_race_stores_exactly_one(store):
    from xit.service import Conflict

    session = store.create_session("race", seed=71)
    store.get_trial(session.session_id, 0)
    options = session.option_orders[0]
    outcomes = []
    barrier = threading.Barrier(6)

    def submit(choice):
        barrier.wait()
        try:
            store.submit_response(session.session_id, 0, choice, 3, 10.0)
            outcomes.append(("ok", choice))
        except Conflict:
            outcomes.append(("conflict", choice))

    threads = [threading.Thread(target=submit, args=(options[i % len(options)],)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    stored = [o for o in outcomes if o[0] == "ok"]
    assert len(stored) == 1
    assert session.cursor == 1
    assert session.records[0].choice == stored[0][1]


# -- export and audit ------------------------------------------------------------------

def test_export_counts_and_schema(store):
    drive_session(store, participant="exp", seed=33)
    csv_text = store.export_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "subject_id,subject_kind,spec,image,choice,true_class,correct,confidence,rt_ms"
    assert len(lines) - 1 == 113
    test_only = store.export_csv(phase="test").strip().split("\n")
    assert len(test_only) - 1 == 102
    practice_only = store.export_csv(phase="practice").strip().split("\n")
    assert len(practice_only) - 1 == 11


def test_export_row_order_is_stable(store):
    drive_session(store, participant="b-second", seed=35)
    drive_session(store, participant="a-first", seed=36)
    import csv as csv_mod
    import io

    rows = list(csv_mod.DictReader(io.StringIO(store.export_csv())))
    sids = [r["subject_id"] for r in rows]
    assert sids == sorted(sids, key=lambda s: sids.index(s))  # grouped by session
    # within a session, trial order
    first = [r for r in rows if r["subject_id"] == rows[0]["subject_id"]]
    assert len(first) == 113


def test_audit_flags_failing_baseline(store):
    session, _, _ = drive_session(store, participant="bad", seed=37, answer="wrong")
    good, _, _ = drive_session(store, participant="good", seed=38)
    audit = store.audit()["sessions"]
    assert audit[session.session_id]["catch_failed"] is True
    assert audit[good.session_id]["catch_failed"] is False
    assert audit[good.session_id]["baseline_trials"] == 3
    assert audit[good.session_id]["has_color_flatten_catch"] is True
    filtered = store.export_csv(exclude_failed_catch=True)
    assert "bad" not in filtered
    assert "good" in filtered


# -- HTTP layer --------------------------------------------------------------------------

@pytest.fixture()
def http_server(tiny_study, tmp_path):
    images_root, study = tiny_study
    server = make_server(study, tmp_path / "data", images_root, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def http(base, method, path, payload=None):
    req = request.Request(base + path, method=method)
    data = None
    if payload is not None:
        data = json.dumps(payload).encode()
        req.add_header("Content-Type", "application/json")
    try:
        with request.urlopen(req, data=data) as resp:
            body = resp.read()
            ctype = resp.headers.get("Content-Type", "")
            return resp.status, json.loads(body) if ctype.startswith("application/json") else body
    except error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_http_endpoints(http_server):
    status, sess = http(http_server, "POST", "/v1/sessions", {"participant_id": "h1", "seed": 41})
    assert status == 201
    proto = sess["protocol"]
    assert proto["practice_trials"] == 11
    assert proto["test_trials"] == 102
    assert proto["num_classes"] == 10
    assert proto["confidence_min"] == 1 and proto["confidence_max"] == 5
    assert proto["rest_every"] == 10
    assert proto["confirm_advance_ms"] == 2000

    sid = sess["session_id"]
    status, view = http(http_server, "GET", f"/v1/sessions/{sid}/trials/0")
    assert status == 200
    assert len(view["class_options"]) == 10
    assert view["instructions"]

    status, png = http(http_server, "GET", view["image_url"])
    assert status == 200
    assert bytes(png[:8]) == b"\x89PNG\r\n\x1a\n"

    status, ack = http(
        http_server,
        "POST",
        f"/v1/sessions/{sid}/trials/0/response",
        {"choice": view["class_options"][0], "confidence": 3, "rt_ms": 77.0},
    )
    assert status == 200 and ack["stored"]

    status, err = http(http_server, "GET", f"/v1/sessions/{sid}/trials/5")
    assert status == 409 and "sequential" in err["error"]

    status, err = http(http_server, "POST", "/v1/sessions", {"participant_id": "h1"})
    assert status == 409

    status, err = http(http_server, "GET", "/v1/sessions/nope")
    assert status == 404

    status, body = http(http_server, "GET", "/v1/export.csv?phase=test")
    assert status == 200
    status, audit = http(http_server, "GET", "/v1/audit.json")
    assert status == 200 and sid in audit["sessions"]
