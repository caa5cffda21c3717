"""Session-oriented HTTP/JSON API for the classroom Bell exercise.

Players choose Alice's and Bob's settings each round; the service deals a
fresh singlet pair, runs the finite-population engine round, assigns
students to relative worlds, pairs them off, and keeps running tallies.
Wire format: JSON over HTTP/1.1, schema ``pl-exercise/1``; errors are
``{code, message, details}``.  Responses are pure functions of
(seed, session inputs); student shuffling is a seeded Fisher-Yates, so
replays are exact.
"""

from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

import numpy as np

from . import sampling, scenarios

SCHEMA = "pl-exercise/1"
QUANTUM_PREDICTION = 0.75
LHV_BOUND = 2.0 / 3.0
SETTINGS = (1, 2, 3)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details

    def body(self) -> dict:
        return {"code": self.code, "message": self.message,
                "details": self.details}


def _round_tables(setting_a: int, setting_b: int):
    # the source's preferred basis follows Alice's setting, as in the
    # classroom exercise; every class then holds a whole number of eighths
    spec = scenarios.builtin("wigner_mermin", setting_a=setting_a,
                             setting_b=setting_b, seed_setting=setting_a)
    return sampling.compile_scenario(spec).report


def _is_representable(n: int) -> bool:
    for sa in SETTINGS:
        for sb in SETTINGS:
            report = _round_tables(sa, sb)
            for table in report.pairing_tables.values():
                for row in table.rows:
                    raw = row.mass * n
                    if abs(raw - round(raw)) > 1e-9:
                        return False
    return True


_MIN_VALID_CACHE: int | None = None


def minimal_valid_lives() -> int:
    global _MIN_VALID_CACHE
    if _MIN_VALID_CACHE is None:
        n = 1
        while not _is_representable(n):
            n += 1
        _MIN_VALID_CACHE = n
    return _MIN_VALID_CACHE


@dataclass
class Session:
    id: str
    lives_per_system: int
    seed: int
    rounds: list[dict] = field(default_factory=list)
    tallies: dict[str, dict[str, int]] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        return {
            "schema": SCHEMA,
            "id": self.id,
            "lives_per_system": self.lives_per_system,
            "seed": self.seed,
            "rounds_played": len(self.rounds),
            "initial_split": {"s1": self.lives_per_system // 2,
                              "s2": self.lives_per_system // 2},
        }

    def recompute_tallies(self) -> dict[str, dict[str, int]]:
        tallies: dict[str, dict[str, int]] = {}
        for r in self.rounds:
            key = f"{r['settings']['a']},{r['settings']['b']}"
            slot = tallies.setdefault(key, {"rounds": 0, "same_outcome_pairs": 0,
                                            "total_pairs": 0})
            slot["rounds"] += 1
            slot["same_outcome_pairs"] += r["counts"]["same"]
            slot["total_pairs"] += len(r["pairs"])
        return tallies

    def summary(self) -> dict:
        same_pairs = diff_pairs = same_hits = opp_hits = 0
        for r in self.rounds:
            n = len(r["pairs"])
            if r["settings"]["a"] == r["settings"]["b"]:
                same_pairs += n
                opp_hits += n - r["counts"]["same"]
            else:
                diff_pairs += n
                same_hits += r["counts"]["same"]
        p_same: float | None = None
        p_opp: float | None = None
        verdict = "insufficient data"
        confidence = None
        if diff_pairs:
            p_same = same_hits / diff_pairs
            margin = 1.96 * math.sqrt(max(p_same * (1.0 - p_same), 1e-12)
                                      / diff_pairs)
            confidence = {"low95": p_same - margin, "high95": p_same + margin}
            verdict = "violation" if p_same - margin > LHV_BOUND else "no violation yet"
        if same_pairs:
            p_opp = opp_hits / same_pairs
        return {
            "schema": SCHEMA,
            "id": self.id,
            "tallies": self.tallies,
            "p_same_given_different": p_same,
            "p_opposite_given_same": p_opp,
            "different_setting_pairs": diff_pairs,
            "same_setting_pairs": same_pairs,
            "quantum_prediction": QUANTUM_PREDICTION,
            "lhv_bound": LHV_BOUND,
            "confidence": confidence,
            "verdict": verdict,
        }


class ExerciseService:
    """In-memory session store; one mutation at a time per session."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def create_session(self, lives_per_system: int = 8, seed: int = 0) -> dict:
        if not isinstance(lives_per_system, int) or isinstance(lives_per_system, bool):
            raise ApiError(400, "bad_request", "lives_per_system must be an integer")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ApiError(400, "bad_request", "seed must be an integer")
        if lives_per_system < 1:
            raise ApiError(400, "bad_request", "lives_per_system must be positive")
        if not _is_representable(lives_per_system):
            raise ApiError(
                422, "not_representable",
                f"{lives_per_system} lives per system cannot be split into whole "
                f"students for every setting pair; the smallest valid value is "
                f"{minimal_valid_lives()}",
                {"minimal_valid": minimal_valid_lives()})
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter:04d}"
            session = Session(sid, lives_per_system, seed)
            self._sessions[sid] = session
        return session.snapshot()

    def _get(self, sid: str) -> Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {sid!r}")
        return session

    def get_session(self, sid: str) -> dict:
        return self._get(sid).snapshot()

    def delete_session(self, sid: str) -> None:
        with self._lock:
            if sid not in self._sessions:
                raise ApiError(404, "unknown_session", f"no session {sid!r}")
            del self._sessions[sid]

    def get_round(self, sid: str, index: int) -> dict:
        session = self._get(sid)
        with session.lock:
            if not 0 <= index < len(session.rounds):
                raise ApiError(404, "unknown_round",
                               f"session {sid!r} has no round {index}")
            return session.rounds[index]

    def get_summary(self, sid: str) -> dict:
        session = self._get(sid)
        with session.lock:
            return session.summary()

    def play_round(self, sid: str, setting_a: int, setting_b: int) -> dict:
        session = self._get(sid)
        if setting_a not in SETTINGS or setting_b not in SETTINGS:
            raise ApiError(400, "bad_setting",
                           f"settings must be one of {list(SETTINGS)}",
                           {"setting_a": setting_a, "setting_b": setting_b})
        with session.lock:
            index = len(session.rounds)
            result = _deal_round(session, index, setting_a, setting_b)
            session.rounds.append(result)
            session.tallies = session.recompute_tallies()
            return result


def _deal_round(session: Session, index: int, setting_a: int, setting_b: int
                ) -> dict:
    n = session.lives_per_system
    report = _round_tables(setting_a, setting_b)
    pairing = report.pairing_tables["compare"]
    rng = np.random.default_rng([session.seed, index])

    rows = [r for r in sorted(
        pairing.rows, key=lambda r: (scenarios.pair_key(r)))
        if round(r.mass * n) > 0]

    def class_key(records):
        return tuple((rec.event.tag, sys, lab)
                     for rec in records for sys, lab in rec.outcomes)

    # students per side, dealt by seeded shuffle, filled class by class
    order_a = list(rng.permutation(n))
    order_b = list(rng.permutation(n))
    alice_students: list[dict] = []
    bob_students: list[dict] = []
    pairs: list[dict] = []
    cursor = 0
    for r in rows:
        count = round(r.mass * n)
        for _ in range(count):
            ia = int(order_a[cursor])
            ib = int(order_b[cursor])
            cursor += 1
            alice_students.append({
                "index": ia, "system": "A",
                "history": [list(t) for t in class_key(r.history_a)],
                "outcome": r.outcome_a,
            })
            bob_students.append({
                "index": ib, "system": "B",
                "history": [list(t) for t in class_key(r.history_b)],
                "outcome": r.outcome_b,
            })
            pairs.append({"alice": ia, "bob": ib,
                          "outcome_a": r.outcome_a, "outcome_b": r.outcome_b,
                          "same": r.outcome_a == r.outcome_b})
    if cursor != n:
        raise ApiError(500, "internal", "student allocation did not cover the class")
    alice_students.sort(key=lambda s: s["index"])
    bob_students.sort(key=lambda s: s["index"])
    pairs.sort(key=lambda p: p["alice"])
    same = sum(1 for p in pairs if p["same"])
    return {
        "schema": SCHEMA,
        "round": index,
        "settings": {"a": setting_a, "b": setting_b},
        "setting_relation": "same" if setting_a == setting_b else "different",
        "students": {"alice": alice_students, "bob": bob_students},
        "pairs": pairs,
        "counts": {"same": same, "different": len(pairs) - same},
        "class_counts": [
            {"outcome_a": r.outcome_a, "outcome_b": r.outcome_b,
             "count": round(r.mass * n)}
            for r in rows
        ],
    }


# ---------------------------------------------------------------------------
# HTTP plumbing


_ROUTES = [
    ("POST", re.compile(r"^/sessions$")),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)$")),
    ("DELETE", re.compile(r"^/sessions/(?P<sid>[^/]+)$")),
    ("POST", re.compile(r"^/sessions/(?P<sid>[^/]+)/rounds$")),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/rounds/(?P<index>\d+)$")),
    ("GET", re.compile(r"^/sessions/(?P<sid>[^/]+)/summary$")),
]


def make_handler(service: ExerciseService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet
            pass

        def _send(self, status: int, body: dict | None) -> None:
            payload = b"" if body is None else json.dumps(
                body, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, DELETE, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()
            if payload:
                self.wfile.write(payload)

        def _json_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            raw = self.rfile.read(length)
            try:
                doc = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise ApiError(400, "bad_json", "request body is not valid JSON")
            if not isinstance(doc, dict):
                raise ApiError(400, "bad_json", "request body must be an object")
            return doc

        def _dispatch(self, method: str) -> None:
            try:
                path = self.path.split("?", 1)[0].rstrip("/") or "/"
                if method == "GET" and path == "/":
                    self._send(200, {"schema": SCHEMA, "service": "exercise",
                                     "endpoints": [m + " " + r.pattern
                                                   for m, r in _ROUTES]})
                    return
                for m, pattern in _ROUTES:
                    if m != method:
                        continue
                    match = pattern.match(path)
                    if not match:
                        continue
                    self._route(method, pattern.pattern, match)
                    return
                raise ApiError(404, "not_found", f"no route for {method} {path}")
            except ApiError as err:
                self._send(err.status, err.body())
            except Exception as err:  # pragma: no cover
                self._send(500, {"code": "internal", "message": str(err),
                                 "details": None})

        def _route(self, method: str, pattern: str, match) -> None:
            if pattern == r"^/sessions$":
                body = self._json_body()
                result = service.create_session(
                    body.get("lives_per_system", 8), body.get("seed", 0))
                self._send(201, result)
            elif pattern == r"^/sessions/(?P<sid>[^/]+)$":
                sid = match.group("sid")
                if method == "GET":
                    self._send(200, service.get_session(sid))
                else:
                    service.delete_session(sid)
                    self._send(204, None)
            elif pattern == r"^/sessions/(?P<sid>[^/]+)/rounds$":
                body = self._json_body()
                if "setting_a" not in body or "setting_b" not in body:
                    raise ApiError(400, "bad_request",
                                   "setting_a and setting_b are required")
                result = service.play_round(match.group("sid"),
                                            body["setting_a"], body["setting_b"])
                self._send(201, result)
            elif pattern == r"^/sessions/(?P<sid>[^/]+)/rounds/(?P<index>\d+)$":
                result = service.get_round(match.group("sid"),
                                           int(match.group("index")))
                self._send(200, result)
            else:
                self._send(200, service.get_summary(match.group("sid")))

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_DELETE(self):
            self._dispatch("DELETE")

        def do_OPTIONS(self):
            self._send(204, None)

    return Handler


def make_server(host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    service = ExerciseService()
    server = ThreadingHTTPServer((host, port), make_handler(service))
    server.service = service  # type: ignore[attr-defined]
    return server


def serve(host: str = "127.0.0.1", port: int = 8700) -> None:
    server = make_server(host, port)
    print(f"exercise service listening on http://{host}:{server.server_address[1]}/",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
