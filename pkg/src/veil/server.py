"""HTTP session service for human-in-the-loop obfuscation.

Sessions live in memory only and expire after a TTL; the premise of the
tool is that user text never leaves the local machine. Each session
serializes its own operations behind a lock while distinct sessions run
fully in parallel. The loaded model is never mutated.

Routes (json bodies):
    POST /v1/sessions                       {"text": ..., "y": ...}
    GET  /v1/sessions/{id}
    GET  /v1/sessions/{id}/importance
    GET  /v1/sessions/{id}/candidates?index=&generator=&top_k=
    POST /v1/sessions/{id}/apply            {"index": ..., "token": ...}
    POST /v1/sessions/{id}/revert
    GET  /v1/meta
Anything else under GET serves the static UI bundle when configured.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .attack import SubstitutionStep
from .candidates import (EmbeddingTable, SynonymConfig, external_candidates,
                         heuristic_flip, heuristic_leet, heuristic_space,
                         lexicon_candidates, sanitize, synonym_candidates)
from .errors import EncoderError, VeilError
from .importance import omission_scores
from .models import ClassifierModel, softmax
from .text import Document, tokenize

logger = logging.getLogger("veil.server")

DEFAULT_TTL = 3600.0


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class Session:
    id: str
    original: Document
    current: list[str]
    y: str
    history: list[SubstitutionStep] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    touched: float = field(default_factory=time.monotonic)
    _importance_cache: tuple[tuple[str, ...], list] | None = None

    def current_doc(self) -> Document:
        return Document(id=self.id, tokens=tuple(self.current),
                        raw=self.original.raw, label=self.original.label)


class ObfuscationService:
    """Session store plus the candidate/importance plumbing around one
    loaded substitute model."""

    def __init__(self, model: ClassifierModel | None,
                 embeddings: EmbeddingTable | None = None,
                 synonym_config: SynonymConfig | None = None,
                 lexicon: dict | None = None,
                 pos_lexicon: dict | None = None,
                 encoder=None,
                 space_seed: int = 0,
                 session_ttl: float = DEFAULT_TTL):
        self.model = model
        self.embeddings = embeddings
        self.synonym_config = synonym_config or SynonymConfig()
        self.lexicon = lexicon
        self.pos_lexicon = pos_lexicon
        self.encoder = encoder
        self.space_seed = space_seed
        self.session_ttl = session_ttl
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    # -- session bookkeeping -------------------------------------------------

    def _purge_expired(self) -> None:
        now = time.monotonic()
        with self._registry_lock:
            stale = [sid for sid, s in self._sessions.items()
                     if now - s.touched > self.session_ttl]
            for sid in stale:
                del self._sessions[sid]

    def _session(self, session_id: str) -> Session:
        self._purge_expired()
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, f"unknown session {session_id!r}")
        session.touched = time.monotonic()
        return session

    def _require_model(self) -> ClassifierModel:
        if self.model is None:
            raise ApiError(503, "no substitute model loaded")
        return self.model

    def _state(self, session: Session) -> dict:
        model = self._require_model()
        logits = model.logits(session.current_doc())
        probabilities = softmax(logits)
        return {
            "session_id": session.id,
            "tokens": list(session.current),
            "y": session.y,
            "prediction": model.labels[int(np.argmax(logits))],
            "probabilities": {label: float(p) for label, p in zip(model.labels, probabilities)},
            "logits": {label: float(v) for label, v in zip(model.labels, logits)},
            "history_len": len(session.history),
            "history": [{"index": s.token_index, "old": s.old, "new": s.new,
                         "generator": s.generator} for s in session.history],
        }

    # -- operations ----------------------------------------------------------

    def create_session(self, text, y) -> dict:
        model = self._require_model()
        if not isinstance(text, str) or not isinstance(y, str):
            raise ApiError(400, "body must carry string fields 'text' and 'y'")
        if y not in model.labels:
            raise ApiError(400, f"unknown label {y!r}; model labels are {list(model.labels)}")
        tokens = tokenize(text)
        if not tokens:
            raise ApiError(400, "text tokenizes to zero tokens")
        session = Session(id=uuid.uuid4().hex,
                          original=Document(id="session", tokens=tuple(tokens), raw=text),
                          current=list(tokens), y=y)
        with self._registry_lock:
            self._sessions[session.id] = session
        return self._state(session)

    def get_state(self, session_id: str) -> dict:
        session = self._session(session_id)
        with session.lock:
            return self._state(session)

    def get_importance(self, session_id: str) -> dict:
        model = self._require_model()
        session = self._session(session_id)
        with session.lock:
            key = tuple(session.current)
            if session._importance_cache and session._importance_cache[0] == key:
                scores = session._importance_cache[1]
            else:
                scores = omission_scores(model, session.current_doc(), session.y)
                session._importance_cache = (key, scores)
            ranked = sorted(scores, key=lambda s: (-s.score, s.token_index))
            return {"scores": [{"index": s.token_index, "token": s.token,
                                "score": s.score, "pre_label": s.pre_label,
                                "post_label": s.post_label} for s in ranked]}

    def generator_availability(self) -> dict[str, str | None]:
        """None means available; otherwise the reason it is not."""
        return {
            "synonym": None if self.embeddings is not None else "no embeddings loaded",
            "leet": None,
            "flip": None,
            "space": None,
            "lexicon": None if self.lexicon is not None else "no synonym lexicon loaded",
            "external_masked": None if self.encoder is not None else "no encoder endpoint",
            "external_dropout": None if self.encoder is not None else "no encoder endpoint",
        }

    def _generate(self, session: Session, index: int, generator: str, top_k: int):
        token = session.current[index]
        availability = self.generator_availability()
        if generator not in availability:
            raise ApiError(400, f"unknown generator {generator!r}")
        reason = availability[generator]
        if reason is not None:
            raise ApiError(400, f"generator {generator!r} unavailable: {reason}")
        if generator == "synonym":
            return synonym_candidates(token, self.embeddings, self.synonym_config)
        if generator == "leet":
            return [heuristic_leet(token)]
        if generator == "flip":
            return [heuristic_flip(token)]
        if generator == "space":
            return [heuristic_space(token, seed=self.space_seed + index)]
        if generator == "lexicon":
            return lexicon_candidates(token, self.lexicon)
        mode = generator.removeprefix("external_")
        try:
            return external_candidates(session.current_doc(), index, mode=mode,
                                       top_k=top_k, endpoint=self.encoder)
        except EncoderError as exc:
            raise ApiError(502, f"encoder failure: {exc}") from exc

    def get_candidates(self, session_id: str, index: int, generator: str,
                       top_k: int = 10) -> dict:
        model = self._require_model()
        session = self._session(session_id)
        with session.lock:
            if not 0 <= index < len(session.current):
                raise ApiError(400, f"token index {index} out of range")
            if top_k < 0:
                raise ApiError(400, "top_k must be >= 0")
            y_index = model.label_index(session.y)
            cands = sanitize(self._generate(session, index, generator, top_k),
                             session.current[index])[:top_k]
            out = []
            for cand in cands:
                tokens = list(session.current)
                tokens[index] = cand.token
                logits = model.logits(Document(id="hypo", tokens=tuple(tokens),
                                               raw=session.original.raw))
                probs = softmax(logits)
                out.append({
                    "token": cand.token,
                    "score": cand.score,
                    "generator": cand.generator,
                    "o_y_after": float(logits[y_index]),
                    "probability_after": float(probs[y_index]),
                    "prediction_after": model.labels[int(np.argmax(logits))],
                    "logits_after": {label: float(v)
                                     for label, v in zip(model.labels, logits)},
                })
            return {"candidates": out}

    def apply(self, session_id: str, index, token) -> dict:
        model = self._require_model()
        session = self._session(session_id)
        with session.lock:
            if not isinstance(index, int) or not 0 <= index < len(session.current):
                raise ApiError(400, f"token index {index!r} out of range")
            if not isinstance(token, str) or not token:
                raise ApiError(400, "substitution token must be a non-empty string")
            y_index = model.label_index(session.y)
            before = float(model.logits(session.current_doc())[y_index])
            old = session.current[index]
            session.current[index] = token
            after = float(model.logits(session.current_doc())[y_index])
            session.history.append(SubstitutionStep(
                token_index=index, old=old, new=token, generator="manual",
                o_y_before=before, o_y_after=after, accepted=True))
            session._importance_cache = None
            return self._state(session)

    def revert(self, session_id: str) -> dict:
        session = self._session(session_id)
        with session.lock:
            if not session.history:
                raise ApiError(409, "history is empty; nothing to revert")
            step = session.history.pop()
            session.current[step.token_index] = step.old
            session._importance_cache = None
            return self._state(session)

    def meta(self) -> dict:
        model = self.model
        return {
            "labels": list(model.labels) if model else [],
            "generators": {name: {"available": reason is None, "reason": reason}
                           for name, reason in self.generator_availability().items()},
            "model": None if model is None else {
                "kind": model.kind, "role": model.role,
                "n_features": model.space.n_columns,
            },
        }


# ---------------------------------------------------------------------------
# HTTP plumbing.

_SESSION_ROUTE = re.compile(r"^/v1/sessions/([0-9a-f]+)(/importance|/candidates|/apply|/revert)?$")


def make_handler(service: ObfuscationService, static_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            logger.debug("%s - %s", self.address_string(), fmt % args)

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return {}
            try:
                payload = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise ApiError(400, f"invalid json body: {exc}")
            if not isinstance(payload, dict):
                raise ApiError(400, "json body must be an object")
            return payload

        def _dispatch(self, method: str) -> None:
            parsed = urlparse(self.path)
            route = parsed.path
            try:
                if route == "/v1/meta" and method == "GET":
                    self._send_json(200, service.meta())
                    return
                if route == "/v1/sessions" and method == "POST":
                    body = self._read_json()
                    self._send_json(201, service.create_session(body.get("text"),
                                                                body.get("y")))
                    return
                match = _SESSION_ROUTE.match(route)
                if match:
                    session_id, tail = match.group(1), match.group(2)
                    if tail is None and method == "GET":
                        self._send_json(200, service.get_state(session_id))
                        return
                    if tail == "/importance" and method == "GET":
                        self._send_json(200, service.get_importance(session_id))
                        return
                    if tail == "/candidates" and method == "GET":
                        query = parse_qs(parsed.query)
                        try:
                            index = int(query.get("index", ["-1"])[0])
                            top_k = int(query.get("top_k", ["10"])[0])
                        except ValueError:
                            raise ApiError(400, "index and top_k must be integers")
                        generator = query.get("generator", ["synonym"])[0]
                        self._send_json(200, service.get_candidates(
                            session_id, index, generator, top_k))
                        return
                    if tail == "/apply" and method == "POST":
                        body = self._read_json()
                        self._send_json(200, service.apply(
                            session_id, body.get("index"), body.get("token")))
                        return
                    if tail == "/revert" and method == "POST":
                        self._send_json(200, service.revert(session_id))
                        return
                if method == "GET" and self._serve_static(route):
                    return
                raise ApiError(404, f"no route for {method} {route}")
            except ApiError as exc:
                self._send_json(exc.status, {"error": exc.message})
            except VeilError as exc:
                self._send_json(400, {"error": str(exc)})
            except Exception:
                logger.exception("unhandled server error")
                self._send_json(500, {"error": "internal server error"})

        def _serve_static(self, route: str) -> bool:
            if static_dir is None:
                return False
            relative = route.lstrip("/") or "index.html"
            target = (static_dir / relative).resolve()
            try:
                target.relative_to(static_dir.resolve())
            except ValueError:
                return False
            if not target.is_file():
                return False
            body = target.read_bytes()
            content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return True

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

    return Handler


def make_server(service: ObfuscationService, host: str = "127.0.0.1", port: int = 8470,
                static_dir=None) -> ThreadingHTTPServer:
    directory = Path(static_dir) if static_dir else None
    handler = make_handler(service, directory)
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: ObfuscationService, host: str, port: int,
                  static_dir=None) -> None:
    server = make_server(service, host, port, static_dir)
    logger.info("serving on http://%s:%d (ctrl-c to stop)", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
