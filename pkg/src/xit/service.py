"""HTTP trial service for psychophysics sessions.

Protocol: 11 practice trials with correct/incorrect feedback, then 102
test trials without feedback; trials are served strictly sequentially; a
rest screen is signalled before the 11th, 21st, ... test trial (after
completion of every 10); class options are reshuffled per trial; reaction
time is measured client-side (delivery-to-submit) and echoed with a
server-measured upper bound for sanity.

State is durable: a JSON-lines journal records session creations and
responses; session orders are recomputed from the journalled seed on
restart, so a restarted service resumes exactly where it stopped.

Endpoints (all JSON unless noted), versioned under /v1:

    POST /v1/sessions                        {participant_id, seed?}
    GET  /v1/sessions/{sid}
    GET  /v1/sessions/{sid}/trials/{n}
    POST /v1/sessions/{sid}/trials/{n}/response   {choice, confidence, rt_ms}
    GET  /v1/images/{item_id}                PNG bytes
    GET  /v1/export.csv?phase=&participant=&exclude_failed_catch=
    GET  /v1/audit.json
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import threading
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .rng import Rng, fisher_yates
from .specs import BASELINE, COLOR_FLATTEN
from .sweep import StudyItem, StudySet

PRACTICE = "practice"
TEST = "test"
DONE = "done"

REST_EVERY = 10
CONFIRM_ADVANCE_MS = 2000
CONFIDENCE_MIN, CONFIDENCE_MAX = 1, 5

INSTRUCTIONS_SNIPPET = (
    "Identify the object in the image, pick the closest class, and rate "
    "your confidence from 1 (least) to 5 (most confident)."
)

EXPORT_COLUMNS = (
    "subject_id",
    "subject_kind",
    "spec",
    "image",
    "choice",
    "true_class",
    "correct",
    "confidence",
    "rt_ms",
)


class ServiceError(Exception):
    status = 500


class ValidationFailure(ServiceError):
    status = 400


class NotFound(ServiceError):
    status = 404


class Conflict(ServiceError):
    status = 409


@dataclass
class TrialRecord:
    session_id: str
    trial_index: int
    phase: str
    item: StudyItem
    class_options: list[str]
    choice: str
    confidence: int
    correct: bool
    rt_ms: float
    rt_invalid: bool
    server_rt_ms: float | None
    submitted_at: str


class Session:
    """One participant's ordered trial sequence and stored responses."""

    def __init__(self, session_id: str, participant_id: str, seed: int,
                 created_at: str, study_set: StudySet):
        self.session_id = session_id
        self.participant_id = participant_id
        self.seed = seed
        self.created_at = created_at
        rng = Rng(seed)
        practice_order = fisher_yates(study_set.practice, rng)
        test_order = fisher_yates(study_set.items, rng)
        self.trials: list[StudyItem] = practice_order + test_order
        self.option_orders: list[list[str]] = [
            fisher_yates(study_set.classes, rng) for _ in self.trials
        ]
        self.practice_count = len(practice_order)
        self.cursor = 0
        self.records: dict[int, TrialRecord] = {}
        self.delivered_at: dict[int, float] = {}
        self.lock = threading.Lock()

    @property
    def total(self) -> int:
        return len(self.trials)

    @property
    def phase(self) -> str:
        if self.cursor >= self.total:
            return DONE
        return PRACTICE if self.cursor < self.practice_count else TEST

    def phase_of(self, index: int) -> str:
        return PRACTICE if index < self.practice_count else TEST

    def test_index(self, index: int) -> int:
        """0-based position within the test phase."""
        return index - self.practice_count

    def show_rest(self, index: int) -> bool:
        if self.phase_of(index) != TEST:
            return False
        t = self.test_index(index)
        return t > 0 and t % REST_EVERY == 0


class StudyStore:
    """Durable session registry over a single JSON-lines journal."""

    def __init__(self, study_set: StudySet, data_dir):
        study_set.validate()
        self.study_set = study_set
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.journal_path = self.data_dir / "journal.jsonl"
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        self._journal_lock = threading.Lock()
        self._items_by_id = {
            item.item_id: item
            for item in study_set.items + study_set.practice
        }
        self._replay()

    # -- persistence --------------------------------------------------------

    def _replay(self) -> None:
        if not self.journal_path.exists():
            return
        with open(self.journal_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec["event"] == "session":
                    session = Session(
                        rec["session_id"], rec["participant_id"], rec["seed"],
                        rec["created_at"], self.study_set,
                    )
                    self.sessions[session.session_id] = session
                elif rec["event"] == "response":
                    session = self.sessions[rec["session_id"]]
                    self._store_response(
                        session,
                        rec["trial_index"],
                        rec["choice"],
                        rec["confidence"],
                        rec["rt_ms"],
                        server_rt_ms=rec.get("server_rt_ms"),
                        submitted_at=rec["submitted_at"],
                        journal=False,
                    )

    def _journal(self, record: dict) -> None:
        with self._journal_lock:
            with open(self.journal_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    # -- session lifecycle ----------------------------------------------------

    def create_session(self, participant_id: str, seed: int | None = None) -> Session:
        if not participant_id or not isinstance(participant_id, str):
            raise ValidationFailure("participant_id is required")
        if seed is not None and not isinstance(seed, int):
            raise ValidationFailure("seed must be an integer")
        with self._registry_lock:
            for session in self.sessions.values():
                if session.participant_id == participant_id and session.phase != DONE:
                    raise Conflict(
                        f"participant {participant_id!r} already has an active session "
                        f"({session.session_id})"
                    )
            if seed is None:
                seed = int.from_bytes(os.urandom(8), "big")
            session = Session(
                session_id=uuid.uuid4().hex[:12],
                participant_id=participant_id,
                seed=seed,
                created_at=datetime.now(timezone.utc).isoformat(),
                study_set=self.study_set,
            )
            self.sessions[session.session_id] = session
        self._journal(
            {
                "event": "session",
                "session_id": session.session_id,
                "participant_id": session.participant_id,
                "seed": session.seed,
                "created_at": session.created_at,
            }
        )
        return session

    def _get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFound(f"unknown session {session_id!r}")
        return session

    def session_view(self, session: Session) -> dict:
        return {
            "session_id": session.session_id,
            "participant_id": session.participant_id,
            "created_at": session.created_at,
            "cursor": session.cursor,
            "phase": session.phase,
            "protocol": {
                "practice_trials": session.practice_count,
                "test_trials": session.total - session.practice_count,
                "total_trials": session.total,
                "num_classes": len(self.study_set.classes),
                "confidence_min": CONFIDENCE_MIN,
                "confidence_max": CONFIDENCE_MAX,
                "rest_every": REST_EVERY,
                "confirm_advance_ms": CONFIRM_ADVANCE_MS,
            },
        }

    # -- trials ---------------------------------------------------------------

    def get_trial(self, session_id: str, index: int) -> dict:
        session = self._get_session(session_id)
        with session.lock:
            if session.phase == DONE:
                raise Conflict("session complete")
            if index != session.cursor:
                raise Conflict(
                    f"sequential access only (next trial is {session.cursor})"
                )
            item = session.trials[index]
            phase = session.phase_of(index)
            # rt timing starts at delivery; rest-screen time is not recorded
            session.delivered_at[index] = time.monotonic()
            view = {
                "session_id": session_id,
                "index": index,
                "phase": phase,
                "phase_index": index if phase == PRACTICE else session.test_index(index),
                "image_url": f"/v1/images/{item.item_id}",
                "item_id": item.item_id,
                "class_options": list(session.option_orders[index]),
                "show_rest": session.show_rest(index),
                "instructions": INSTRUCTIONS_SNIPPET,
                "progress": {
                    "completed_test": max(0, session.cursor - session.practice_count),
                    "total_test": session.total - session.practice_count,
                },
            }
            return view

    def _store_response(
        self,
        session: Session,
        index: int,
        choice: str,
        confidence: int,
        rt_ms: float,
        server_rt_ms: float | None,
        submitted_at: str,
        journal: bool,
    ) -> TrialRecord:
        if index in session.records:
            raise Conflict(f"trial {index} already has a stored response")
        if index != session.cursor:
            raise Conflict(f"sequential access only (next trial is {session.cursor})")
        if not isinstance(confidence, int) or not CONFIDENCE_MIN <= confidence <= CONFIDENCE_MAX:
            raise ValidationFailure(
                f"confidence must be an integer in "
                f"[{CONFIDENCE_MIN}, {CONFIDENCE_MAX}]"
            )
        options = session.option_orders[index]
        if choice not in options:
            raise ValidationFailure(f"choice {choice!r} not among this trial's options")
        if not isinstance(rt_ms, (int, float)):
            raise ValidationFailure("rt_ms must be a number")
        item = session.trials[index]
        record = TrialRecord(
            session_id=session.session_id,
            trial_index=index,
            phase=session.phase_of(index),
            item=item,
            class_options=list(options),
            choice=choice,
            confidence=confidence,
            correct=choice == item.true_class,
            rt_ms=float(rt_ms),
            rt_invalid=rt_ms < 0,
            server_rt_ms=server_rt_ms,
            submitted_at=submitted_at,
        )
        session.records[index] = record
        session.cursor += 1
        if journal:
            self._journal(
                {
                    "event": "response",
                    "session_id": session.session_id,
                    "trial_index": index,
                    "choice": choice,
                    "confidence": confidence,
                    "rt_ms": float(rt_ms),
                    "server_rt_ms": server_rt_ms,
                    "submitted_at": submitted_at,
                }
            )
        return record

    def submit_response(
        self, session_id: str, index: int, choice: str, confidence: int, rt_ms: float
    ) -> dict:
        session = self._get_session(session_id)
        with session.lock:
            delivered = session.delivered_at.get(index)
            server_rt_ms = (
                (time.monotonic() - delivered) * 1000.0 if delivered is not None else None
            )
            record = self._store_response(
                session,
                index,
                choice,
                confidence,
                rt_ms,
                server_rt_ms=server_rt_ms,
                submitted_at=datetime.now(timezone.utc).isoformat(),
                journal=True,
            )
            ack = {
                "stored": True,
                "index": index,
                "phase": record.phase,
                "session_phase": session.phase,
                "next_index": session.cursor if session.phase != DONE else None,
            }
            # feedback only during practice, never on test trials
            if record.phase == PRACTICE:
                ack["feedback"] = "correct" if record.correct else "incorrect"
            return ack

    # -- export / audit ---------------------------------------------------------

    def iter_records(self):
        for sid in sorted(self.sessions):
            session = self.sessions[sid]
            for index in sorted(session.records):
                yield session, session.records[index]

    def audit(self) -> dict:
        """Catch-trial audit: flags sessions with any wrong baseline answer."""
        sessions = {}
        for sid in sorted(self.sessions):
            session = self.sessions[sid]
            baseline_total = 0
            baseline_correct = 0
            has_flatten = any(
                item.spec.kind == COLOR_FLATTEN
                for item in session.trials[session.practice_count:]
            )
            for index, record in session.records.items():
                if record.phase != TEST:
                    continue
                if record.item.spec.kind == BASELINE:
                    baseline_total += 1
                    baseline_correct += record.correct
            sessions[sid] = {
                "participant_id": session.participant_id,
                "complete": session.phase == DONE,
                "baseline_trials": baseline_total,
                "baseline_correct": baseline_correct,
                "has_color_flatten_catch": has_flatten,
                "catch_failed": baseline_correct < baseline_total,
            }
        return {"sessions": sessions}

    def export_csv(
        self,
        phase: str | None = None,
        participant_id: str | None = None,
        exclude_failed_catch: bool = False,
    ) -> str:
        failed = {
            sid
            for sid, info in self.audit()["sessions"].items()
            if info["catch_failed"]
        }
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(EXPORT_COLUMNS)
        for session, record in self.iter_records():
            if phase and record.phase != phase:
                continue
            if participant_id and session.participant_id != participant_id:
                continue
            if exclude_failed_catch and session.session_id in failed:
                continue
            writer.writerow(
                [
                    session.participant_id,
                    "human",
                    record.item.spec.canonical(),
                    record.item.item_id,
                    record.choice,
                    record.item.true_class,
                    int(record.correct),
                    record.confidence,
                    f"{record.rt_ms:g}",
                ]
            )
        return buf.getvalue()


# -- HTTP layer ----------------------------------------------------------------

_ROUTES = [
    ("POST", re.compile(r"^/v1/sessions$"), "create_session"),
    ("GET", re.compile(r"^/v1/sessions/(?P<sid>[^/]+)$"), "get_session"),
    ("GET", re.compile(r"^/v1/sessions/(?P<sid>[^/]+)/trials/(?P<n>\d+)$"), "get_trial"),
    (
        "POST",
        re.compile(r"^/v1/sessions/(?P<sid>[^/]+)/trials/(?P<n>\d+)/response$"),
        "post_response",
    ),
    ("GET", re.compile(r"^/v1/images/(?P<item>[^/]+)$"), "get_image"),
    ("GET", re.compile(r"^/v1/export\.csv$"), "get_export"),
    ("GET", re.compile(r"^/v1/audit\.json$"), "get_audit"),
]

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".map": "application/json",
}


class _Handler(BaseHTTPRequestHandler):
    server_version = "xit-study"
    store: StudyStore  # set by make_server
    images_root: Path
    static_root: Path | None
    quiet = True

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    # -- plumbing --

    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self._send_bytes(body, "application/json", status)

    def _send_bytes(self, body: bytes, content_type: str, status: int = 200) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        # the UI may be hosted anywhere, so the API answers cross-origin
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValidationFailure("request body must be JSON")
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"bad JSON body: {exc}") from exc
        if not isinstance(payload, dict):
            raise ValidationFailure("JSON body must be an object")
        return payload

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        try:
            for verb, pattern, name in _ROUTES:
                if verb != method:
                    continue
                match = pattern.match(parsed.path)
                if match:
                    getattr(self, f"_handle_{name}")(match, parse_qs(parsed.query))
                    return
            if method == "GET" and self.static_root is not None:
                self._handle_static(parsed.path)
                return
            raise NotFound(f"no route for {method} {parsed.path}")
        except ServiceError as exc:
            self._send_json({"error": str(exc)}, status=exc.status)
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json({"error": f"internal error: {exc}"}, status=500)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        # CORS preflight for the JSON POST endpoints
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- handlers --

    def _handle_create_session(self, match, query):
        payload = self._read_json()
        session = self.store.create_session(
            participant_id=payload.get("participant_id"),
            seed=payload.get("seed"),
        )
        self._send_json(self.store.session_view(session), status=201)

    def _handle_get_session(self, match, query):
        session = self.store._get_session(match["sid"])
        self._send_json(self.store.session_view(session))

    def _handle_get_trial(self, match, query):
        self._send_json(self.store.get_trial(match["sid"], int(match["n"])))

    def _handle_post_response(self, match, query):
        payload = self._read_json()
        ack = self.store.submit_response(
            match["sid"],
            int(match["n"]),
            choice=payload.get("choice"),
            confidence=payload.get("confidence"),
            rt_ms=payload.get("rt_ms"),
        )
        self._send_json(ack)

    def _handle_get_image(self, match, query):
        item = self.store._items_by_id.get(match["item"])
        if item is None:
            raise NotFound(f"unknown image {match['item']!r}")
        path = (self.images_root / item.image_path).resolve()
        if not str(path).startswith(str(self.images_root.resolve())):
            raise NotFound("image path escapes image root")
        if not path.exists():
            raise NotFound(f"image file missing: {item.image_path}")
        self._send_bytes(path.read_bytes(), "image/png")

    def _handle_get_export(self, match, query):
        phase = (query.get("phase") or [None])[0]
        if phase not in (None, "", PRACTICE, TEST):
            raise ValidationFailure("phase must be practice or test")
        participant = (query.get("participant") or [None])[0]
        exclude = (query.get("exclude_failed_catch") or ["false"])[0].lower() == "true"
        csv_text = self.store.export_csv(
            phase=phase or None,
            participant_id=participant,
            exclude_failed_catch=exclude,
        )
        self._send_bytes(csv_text.encode("utf-8"), "text/csv; charset=utf-8")

    def _handle_get_audit(self, match, query):
        self._send_json(self.store.audit())

    def _handle_static(self, path: str) -> None:
        if path in ("", "/"):
            path = "/index.html"
        rel = path.lstrip("/")
        target = (self.static_root / rel).resolve()
        if not str(target).startswith(str(self.static_root.resolve())) or not target.is_file():
            raise NotFound(f"no static file {path!r}")
        ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
        self._send_bytes(target.read_bytes(), ctype)


def make_server(
    study_set: StudySet,
    data_dir,
    images_dir,
    host: str = "127.0.0.1",
    port: int = 0,
    static_dir=None,
    quiet: bool = True,
) -> ThreadingHTTPServer:
    """Build a ready-to-serve ThreadingHTTPServer; port 0 picks a free port."""
    store = StudyStore(study_set, data_dir)
    handler = type(
        "Handler",
        (_Handler,),
        {
            "store": store,
            "images_root": Path(images_dir),
            "static_root": Path(static_dir) if static_dir else None,
            "quiet": quiet,
        },
    )
    server = ThreadingHTTPServer((host, port), handler)
    server.store = store
    return server
