"""HTTP session service: the interactive loop over a JSON API.

Endpoints
---------
    POST /sessions                  {config?, seed?, initial_state?} -> session
    GET  /sessions/{id}             session record
    POST /sessions/{id}/turns       {instruction, dsl?} -> turn outcome
    GET  /sessions/{id}/graph       nodes + actions + head
    POST /sessions/{id}/undo        {target_uri?} -> new head
    GET  /sessions/{id}/metrics     per-turn scores, computed on demand
    GET  /images/{uri}              immutable PNG bytes

One writer per session: a second concurrent turn (or undo) on the same
session gets 409 Busy. Every mutation appends to the session's JSON-lines
log, so a killed service reopens sessions by replay.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .errors import EditLoopError, SessionClosed, UnknownParent, UnknownTarget
from .history import BlobStore, DebugLog, SessionLog, replay_log
from .images import decode_png
from .metrics import GradientMagnitudeProvider, score_turn_pair
from .planning import EditSession, LlmPlannerClient, SessionConfig
from .scene import state_from_json, state_to_json
from .synth import SessionSpec, synth_initial_state

SCHEMA_VERSION = 1


@dataclass
class SessionRecord:
    session_id: str
    config: SessionConfig
    graph_log_path: str
    status: str = "open"

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "config": self.config.to_json(),
            "graph_log_path": self.graph_log_path,
            "status": self.status,
        }


@dataclass
class SessionRuntime:
    record: SessionRecord
    session: EditSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    turn_log: list[dict] = field(default_factory=list)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, fields=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.fields = fields or {}

    def body(self) -> dict:
        doc = {"error": {"code": self.code, "message": self.message}}
        if self.fields:
            doc["error"]["fields"] = self.fields
        return doc


def _config_from_json(doc: dict) -> SessionConfig:
    known = {"backend", "planner_mode", "feather_sigma", "margin", "padding",
             "retry_budget", "max_subgoals", "turn_limit", "degrade_seed",
             "remote_endpoint", "remote_token"}
    unknown = set(doc) - known
    if unknown:
        raise ApiError(400, "validation", "unknown config fields",
                       {k: "unknown field" for k in sorted(unknown)})
    try:
        return SessionConfig(**doc)
    except TypeError as exc:
        raise ApiError(400, "validation", f"bad config: {exc}")


class EditService:
    """Session registry + request handling, independent of the HTTP plumbing."""

    def __init__(self, store_dir: str, llm_client: Optional[LlmPlannerClient] = None):
        self.store_dir = store_dir
        self.llm_client = llm_client
        self.sessions: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()
        self._counter = 0
        os.makedirs(store_dir, exist_ok=True)
        self._reopen_existing()

    # -- persistence ----------------------------------------------------------

    def _paths(self, session_id: str) -> dict:
        base = os.path.join(self.store_dir, session_id)
        return {
            "base": base,
            "log": os.path.join(base, "log.jsonl"),
            "debug": os.path.join(base, "debug.jsonl"),
            "blobs": os.path.join(base, "blobs"),
            "meta": os.path.join(base, "session.json"),
        }

    def _reopen_existing(self) -> None:
        for name in sorted(os.listdir(self.store_dir)):
            paths = self._paths(name)
            if not os.path.exists(paths["meta"]) or not os.path.exists(paths["log"]):
                continue
            with open(paths["meta"], encoding="utf-8") as f:
                meta = json.load(f)
            config = SessionConfig(**meta["config"])
            graph = replay_log(paths["log"])
            blobs = BlobStore(paths["blobs"])
            session = EditSession.from_replay(
                graph, config, blobs, llm_client=self.llm_client,
                log=SessionLog(paths["log"]), debug_log=DebugLog(paths["debug"]))
            record = SessionRecord(name, config, paths["log"],
                                   status=meta.get("status", "open"))
            self.sessions[name] = SessionRuntime(record=record, session=session)
            number = int(name.split("-")[-1]) if name.split("-")[-1].isdigit() else 0
            self._counter = max(self._counter, number)

    # -- session lifecycle -------------------------------------------------------

    def create_session(self, body: dict) -> dict:
        config = _config_from_json(body.get("config", {}))
        with self._registry_lock:
            self._counter += 1
            session_id = f"session-{self._counter:04d}"
        paths = self._paths(session_id)
        os.makedirs(paths["base"], exist_ok=True)
        if "initial_state" in body:
            try:
                scene = state_from_json(body["initial_state"])
            except (KeyError, ValueError, EditLoopError) as exc:
                raise ApiError(400, "validation", f"bad initial_state: {exc}")
        else:
            seed = body.get("seed", 0)
            if not isinstance(seed, int):
                raise ApiError(400, "validation", "seed must be an integer",
                               {"seed": "integer required"})
            canvas = tuple(body.get("canvas", (256, 256)))
            spec = SessionSpec(seed=seed, canvas=canvas)
            scene = synth_initial_state(seed, spec)
        session = EditSession(
            scene, config, llm_client=self.llm_client,
            log=SessionLog(paths["log"]),
            debug_log=DebugLog(paths["debug"]),
            blobs=BlobStore(paths["blobs"]),
        )
        record = SessionRecord(session_id, config, paths["log"])
        with open(paths["meta"], "w", encoding="utf-8") as f:
            json.dump({"config": config.to_json(), "status": "open"}, f,
                      sort_keys=True)
            f.write("\n")
        self.sessions[session_id] = SessionRuntime(record=record, session=session)
        return {
            "session_id": session_id,
            "root_uri": session.graph.root_uri(),
            "head_uri": session.graph.head_uri,
            "config": config.to_json(),
        }

    def _runtime(self, session_id: str) -> SessionRuntime:
        runtime = self.sessions.get(session_id)
        if runtime is None:
            raise ApiError(404, "not_found", f"no session {session_id!r}")
        return runtime

    # -- request handlers ---------------------------------------------------------

    def get_session(self, session_id: str) -> dict:
        runtime = self._runtime(session_id)
        return {**runtime.record.to_json(),
                "head_uri": runtime.session.graph.head_uri,
                "n_turns": len(runtime.session.graph.actions)}

    def run_turn(self, session_id: str, body: dict) -> dict:
        runtime = self._runtime(session_id)
        instruction = body.get("instruction", "")
        if not instruction or not isinstance(instruction, str):
            raise ApiError(400, "validation", "instruction must be a non-empty string",
                           {"instruction": "required"})
        dsl = body.get("dsl")
        if not runtime.lock.acquire(blocking=False):
            raise ApiError(409, "busy", "a turn is already in flight on this session")
        try:
            outcome = runtime.session.run_turn(instruction, dsl=dsl)
        except SessionClosed as exc:
            raise ApiError(409, "closed", str(exc))
        finally:
            runtime.lock.release()
        doc = {
            "status": outcome.status,
            "attempts": outcome.attempts,
            "final_uri": outcome.final_uri,
            "failing": [list(pair) for pair in outcome.failing],
            "error": outcome.error,
        }
        if outcome.action_context is not None:
            doc["action"] = {
                "turn_index": outcome.action_context.turn_index,
                "intent": outcome.action_context.intent,
                "key_image_uris": list(outcome.action_context.key_image_uris),
            }
        runtime.turn_log.append({"instruction": instruction, **doc})
        return doc

    def get_graph(self, session_id: str) -> dict:
        graph = self._runtime(session_id).session.graph
        return {
            "schema_version": SCHEMA_VERSION,
            "head_uri": graph.head_uri,
            "nodes": [{
                "uri": n.uri,
                "description": n.description,
                "parent_uri": n.parent_uri,
                "transformation_type": n.transformation_type,
                "created_at": n.created_at,
            } for n in sorted(graph.nodes.values(), key=lambda n: n.created_at)],
            "actions": [{
                "turn_index": a.turn_index,
                "intent": a.intent,
                "key_image_uris": list(a.key_image_uris),
            } for a in graph.actions],
        }

    def undo(self, session_id: str, body: dict) -> dict:
        runtime = self._runtime(session_id)
        if not runtime.lock.acquire(blocking=False):
            raise ApiError(409, "busy", "a turn is already in flight on this session")
        try:
            node = runtime.session.undo(body.get("target_uri"))
        except UnknownParent as exc:
            raise ApiError(400, "validation", str(exc))
        except UnknownTarget as exc:
            raise ApiError(404, "not_found", str(exc))
        finally:
            runtime.lock.release()
        return {"head_uri": node.uri, "description": node.description}

    def get_image(self, uri: str) -> bytes:
        for runtime in self.sessions.values():
            if runtime.session.blobs.has(uri):
                return runtime.session.blobs.get(uri)
        raise ApiError(404, "not_found", f"no image {uri!r}")

    def get_metrics(self, session_id: str) -> dict:
        runtime = self._runtime(session_id)
        session = runtime.session
        graph = session.graph
        provider = GradientMagnitudeProvider()
        root_uri = graph.root_uri()
        root_image = decode_png(session.blobs.get(root_uri))
        turns = []
        prev_uri = root_uri
        for action in graph.actions:
            end_uri = action.key_image_uris[-1]
            pre = decode_png(session.blobs.get(prev_uri))
            post = decode_png(session.blobs.get(end_uri))
            pre_scene = graph.node(prev_uri).scene_ref
            post_scene = graph.node(end_uri).scene_ref
            score = score_turn_pair(pre_scene, post_scene, post_scene,
                                    pre, post, action.turn_index,
                                    provider=provider, root_image=root_image)
            turns.append(score.to_json())
            prev_uri = end_uri
        return {"schema_version": SCHEMA_VERSION, "turns": turns}


# --- HTTP plumbing ------------------------------------------------------------------

_ROUTES = [
    ("POST", re.compile(r"^/sessions$"), "create_session"),
    ("GET", re.compile(r"^/sessions/([^/]+)$"), "get_session"),
    ("POST", re.compile(r"^/sessions/([^/]+)/turns$"), "run_turn"),
    ("GET", re.compile(r"^/sessions/([^/]+)/graph$"), "get_graph"),
    ("POST", re.compile(r"^/sessions/([^/]+)/undo$"), "undo"),
    ("GET", re.compile(r"^/sessions/([^/]+)/metrics$"), "get_metrics"),
]


def make_handler(service: EditService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _send_json(self, status: int, body: dict):
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def _dispatch(self, method: str):
            try:
                if method == "GET" and self.path.startswith("/images/"):
                    uri = self.path[len("/images/"):]
                    data = service.get_image(uri)
                    self.send_response(200)
                    self.send_header("Content-Type", "image/png")
                    self.send_header("Content-Length", str(len(data)))
                    self.send_header("Cache-Control",
                                     "public, max-age=31536000, immutable")
                    self.send_header("Access-Control-Allow-Origin", "*")
                    self.end_headers()
                    self.wfile.write(data)
                    return
                body = {}
                if method == "POST":
                    length = int(self.headers.get("Content-Length", 0))
                    raw = self.rfile.read(length) if length else b""
                    if raw:
                        try:
                            body = json.loads(raw)
                        except json.JSONDecodeError:
                            raise ApiError(400, "validation", "body is not JSON")
                for verb, pattern, name in _ROUTES:
                    if verb != method:
                        continue
                    match = pattern.match(self.path)
                    if match:
                        handler = getattr(service, name)
                        args = list(match.groups())
                        if method == "POST":
                            args.append(body)
                        self._send_json(200, handler(*args))
                        return
                raise ApiError(404, "not_found", f"no route {method} {self.path}")
            except ApiError as exc:
                self._send_json(exc.status, exc.body())
            except EditLoopError as exc:
                self._send_json(400, {"error": {"code": "validation",
                                                "message": str(exc)}})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def log_message(self, *args):
            pass

    return Handler


def serve(addr: str, store_dir: str,
          llm_client: Optional[LlmPlannerClient] = None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; caller runs serve_forever."""
    host, _, port = addr.rpartition(":")
    service = EditService(store_dir, llm_client=llm_client)
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)),
                                 make_handler(service))
    server.service = service
    return server
