"""Editing-history graph with three-level memory.

Image nodes form an append-only, content-addressed DAG (asset level).
Per-attempt tool records are transient working memory (execution level):
they stream to a debug sidecar and are dropped from persistent memory when
a turn commits. Committed turns leave one compact action record each
(planning level), so persistent memory grows with turns, never with
trial-and-error attempts.

Single-writer discipline: all mutations of one graph must be externally
serialized (the session service does this); reads are safe concurrently.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import CycleWouldForm, NoSuccessfulPath, UnknownParent, UnknownTarget
from .images import content_uri
from .scene import EditCommand, SceneState, command_from_json, command_to_json, \
    state_from_json, state_to_json

SCHEMA_VERSION = 1

TRANSFORMATION_TYPES = ("root", "replace", "remove", "add", "adjust", "undo")


@dataclass(frozen=True)
class ImageContext:
    """Asset-level node: one image state in the editing history."""
    uri: str
    description: str
    parent_uri: Optional[str]
    transformation_type: str
    scene_ref: Optional[SceneState]
    created_at: int  # monotonic sequence number, not wall-clock

    def __post_init__(self):
        if self.transformation_type not in TRANSFORMATION_TYPES:
            raise ValueError(f"bad transformation type {self.transformation_type!r}")
        if (self.parent_uri is None) != (self.transformation_type == "root"):
            raise ValueError("parent_uri is absent iff transformation_type is root")


@dataclass(frozen=True)
class ToolContext:
    """Execution-level record of one tool attempt (transient working memory)."""
    tool_name: str
    parameters: dict
    thought: str
    referenced_uris: tuple[str, ...]
    status: str  # succeeded | failed | retried
    attempt_index: int

    def __post_init__(self):
        if self.status not in ("succeeded", "failed", "retried"):
            raise ValueError(f"bad status {self.status!r}")
        if self.attempt_index < 1:
            raise ValueError("attempt_index starts at 1")


@dataclass(frozen=True)
class ActionContext:
    """Planning-level record of one verified turn: intent + accepted path only."""
    intent: str
    key_image_uris: tuple[str, ...]
    turn_index: int
    command_summary: tuple[EditCommand, ...]


class BlobStore:
    """Write-once byte store keyed by content uri; optionally directory-backed."""

    def __init__(self, directory: Optional[str] = None):
        self._dir = directory
        self._mem: dict[str, bytes] = {}
        if directory:
            os.makedirs(directory, exist_ok=True)

    def _path(self, uri: str) -> str:
        return os.path.join(self._dir, uri + ".png")

    def put(self, data: bytes) -> str:
        uri = content_uri(data)
        if self._dir is not None:
            path = self._path(uri)
            if not os.path.exists(path):
                tmp = path + ".tmp"
                with open(tmp, "wb") as f:
                    f.write(data)
                os.replace(tmp, path)
        elif uri not in self._mem:
            self._mem[uri] = data
        return uri

    def get(self, uri: str) -> bytes:
        if self._dir is not None:
            path = self._path(uri)
            if not os.path.exists(path):
                raise UnknownTarget(uri)
            with open(path, "rb") as f:
                return f.read()
        try:
            return self._mem[uri]
        except KeyError:
            raise UnknownTarget(uri) from None

    def has(self, uri: str) -> bool:
        if self._dir is not None:
            return os.path.exists(self._path(uri))
        return uri in self._mem


@dataclass
class StateGraph:
    """Append-only node map plus committed actions and the current head."""
    nodes: dict[str, ImageContext] = field(default_factory=dict)
    actions: list[ActionContext] = field(default_factory=list)
    head_uri: Optional[str] = None
    _sequence: int = 0

    def root_uri(self) -> str:
        for uri, node in self.nodes.items():
            if node.parent_uri is None:
                return uri
        raise UnknownTarget("graph has no root")

    def node(self, uri: str) -> ImageContext:
        try:
            return self.nodes[uri]
        except KeyError:
            raise UnknownTarget(uri) from None


def record_image(graph: StateGraph, image_bytes: bytes, parent_uri: Optional[str],
                 transformation_type: str, description: str,
                 scene_ref: Optional[SceneState] = None,
                 blobs: Optional[BlobStore] = None) -> ImageContext:
    """Append a content-addressed node; identical bytes return the existing node.

    Does not move the head: advancing is an explicit, separate step.
    """
    uri = content_uri(image_bytes)
    if uri in graph.nodes:
        if blobs is not None:
            blobs.put(image_bytes)
        return graph.nodes[uri]
    if transformation_type == "root":
        if graph.nodes:
            raise CycleWouldForm("a graph has exactly one root")
        parent_uri = None
    else:
        if parent_uri is None or parent_uri not in graph.nodes:
            raise UnknownParent(f"parent {parent_uri!r} not recorded")
    node = ImageContext(
        uri=uri,
        description=description,
        parent_uri=parent_uri,
        transformation_type=transformation_type,
        scene_ref=scene_ref,
        created_at=graph._sequence,
    )
    graph._sequence += 1
    graph.nodes[uri] = node
    if blobs is not None:
        blobs.put(image_bytes)
    if graph.head_uri is None:
        graph.head_uri = uri
    return node


def lineage(graph: StateGraph, uri: str) -> list[ImageContext]:
    """Path of nodes from the root to uri (inclusive)."""
    node = graph.node(uri)
    path = [node]
    while node.parent_uri is not None:
        node = graph.node(node.parent_uri)
        path.append(node)
    path.reverse()
    return path


def rollback(graph: StateGraph, target_uri: str) -> ImageContext:
    """Move the head to an existing node; nothing is deleted, branches persist."""
    node = graph.node(target_uri)
    graph.head_uri = target_uri
    return node


def fold_turn(graph: StateGraph, tool_contexts: list[ToolContext], intent: str,
              verified_commands: list[EditCommand],
              key_image_uris: list[str],
              debug_log: Optional["DebugLog"] = None) -> ActionContext:
    """Commit a turn: keep intent + accepted path, drop the attempt details.

    The ToolContexts go to the debug sidecar (if any) and nowhere else; the
    returned ActionContext contains no tool parameters and no thought text,
    so persistent memory is the same size whether the turn took 1 attempt
    or 10.
    """
    if not any(tc.status == "succeeded" for tc in tool_contexts):
        raise NoSuccessfulPath("no succeeded attempt to fold")
    for uri in key_image_uris:
        graph.node(uri)  # raises UnknownTarget if the path is broken
    action = ActionContext(
        intent=intent,
        key_image_uris=tuple(key_image_uris),
        turn_index=len(graph.actions) + 1,
        command_summary=tuple(verified_commands),
    )
    graph.actions.append(action)
    if debug_log is not None:
        for tc in tool_contexts:
            debug_log.write_tool_context(action.turn_index, tc)
    return action


def render_memory(graph: StateGraph, budget_hint: Optional[int] = None) -> str:
    """Planner-facing memory document: actions and head lineage, never attempts.

    Size grows with committed turns; a budget_hint elides the oldest turn
    lines when exceeded.
    """
    lines = []
    if graph.head_uri is not None:
        root = graph.node(graph.root_uri())
        lines.append(f"root: {root.description} [{root.uri}]")
    turn_lines = [
        f"turn {a.turn_index}: {a.intent} -> {a.key_image_uris[-1]}"
        for a in graph.actions
    ]
    head_lines = []
    if graph.head_uri is not None:
        chain = lineage(graph, graph.head_uri)
        head_lines.append("head: " + graph.head_uri)
        head_lines.append("lineage: " + " > ".join(n.uri for n in chain))
        head_lines.append("state: " + chain[-1].description)
    doc = "\n".join(lines + turn_lines + head_lines)
    if budget_hint is not None and len(doc) > budget_hint and turn_lines:
        keep = turn_lines[-3:]
        elided = len(turn_lines) - len(keep)
        if elided > 0:
            keep = [f"[... {elided} earlier turns elided ...]"] + keep
        doc = "\n".join(lines + keep + head_lines)
    return doc


# --- persistence: JSON-lines session log --------------------------------------

def _node_record(node: ImageContext) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "image_node",
        "uri": node.uri,
        "description": node.description,
        "parent_uri": node.parent_uri,
        "transformation_type": node.transformation_type,
        "scene": state_to_json(node.scene_ref) if node.scene_ref else None,
        "created_at": node.created_at,
    }


def _action_record(action: ActionContext) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "action_context",
        "turn_index": action.turn_index,
        "intent": action.intent,
        "key_image_uris": list(action.key_image_uris),
        "commands": [command_to_json(c) for c in action.command_summary],
    }


def _head_record(head_uri: str, reason: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "head_move",
        "head_uri": head_uri,
        "reason": reason,
    }


class SessionLog:
    """Append-only JSON-lines log; replaying it reconstructs the graph."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)

    def _append(self, record: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
            f.flush()
            os.fsync(f.fileno())

    def log_node(self, node: ImageContext) -> None:
        self._append(_node_record(node))

    def log_action(self, action: ActionContext) -> None:
        self._append(_action_record(action))

    def log_head(self, head_uri: str, reason: str) -> None:
        self._append(_head_record(head_uri, reason))


def replay_log(path: str) -> StateGraph:
    """Rebuild a StateGraph from a JSON-lines log.

    The head is the last logged head move; nodes recorded after it (a turn
    that never committed) are present but do not affect the head.
    """
    graph = StateGraph()
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["type"] == "image_node":
                node = ImageContext(
                    uri=rec["uri"],
                    description=rec["description"],
                    parent_uri=rec["parent_uri"],
                    transformation_type=rec["transformation_type"],
                    scene_ref=state_from_json(rec["scene"]) if rec["scene"] else None,
                    created_at=rec["created_at"],
                )
                graph.nodes[node.uri] = node
                graph._sequence = max(graph._sequence, node.created_at + 1)
            elif rec["type"] == "action_context":
                graph.actions.append(ActionContext(
                    intent=rec["intent"],
                    key_image_uris=tuple(rec["key_image_uris"]),
                    turn_index=rec["turn_index"],
                    command_summary=tuple(command_from_json(c) for c in rec["commands"]),
                ))
            elif rec["type"] == "head_move":
                graph.head_uri = rec["head_uri"]
    return graph


class DebugLog:
    """Sidecar stream for folded ToolContexts; never read back into memory."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self.records: list[dict] = []  # kept for in-memory inspection in tests

    def write_tool_context(self, turn_index: int, tc: ToolContext) -> None:
        rec = {
            "schema_version": SCHEMA_VERSION,
            "type": "tool_context",
            "turn_index": turn_index,
            "tool_name": tc.tool_name,
            "parameters": tc.parameters,
            "thought": tc.thought,
            "referenced_uris": list(tc.referenced_uris),
            "status": tc.status,
            "attempt_index": tc.attempt_index,
        }
        self.records.append(rec)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    def serialized_size(self) -> int:
        return sum(len(json.dumps(r)) for r in self.records)


def serialize_persistent_memory(graph: StateGraph) -> bytes:
    """Canonical bytes of everything that survives folding (for size checks)."""
    doc = {
        "nodes": [_node_record(graph.nodes[u]) for u in sorted(graph.nodes)],
        "actions": [_action_record(a) for a in graph.actions],
        "head_uri": graph.head_uri,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
