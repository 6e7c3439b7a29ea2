"""Planner/executor loop: instruction intake, quality testing, turn commits.

A turn runs as plan -> execute sub-goals -> perceive -> quality test, with
bounded retries of the failing sub-goals. The history-graph head moves only
when the turn commits or rolls back; a turn that fails hard leaves the graph
exactly as it found it. Exactly one action record is folded per committed
turn, however many attempts it took.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import requests

from .backends import DegradingBackend, RemoteBackend, SymbolicBackend
from .dsl import parse_canonical
from .errors import (
    BackendRejected,
    BackendTimeout,
    DimensionMismatch,
    DslSemanticError,
    DslSyntaxError,
    EditLoopError,
    LlmUnavailable,
    ParseFailed,
    PlanTooLarge,
    ProviderUnavailable,
    SessionClosed,
    UnknownParent,
)
from .history import (
    ActionContext,
    BlobStore,
    DebugLog,
    ImageContext,
    SessionLog,
    StateGraph,
    ToolContext,
    fold_turn,
    record_image,
    render_memory,
)
from .images import decode_png, encode_png
from .layers import ExecutorConfig, execute_atomic
from .raster import render
from .scene import (
    Add,
    EditCommand,
    Replace,
    SceneState,
    Undo,
    apply_transition,
    command_kind,
    command_target,
    command_to_json,
    diff_states,
)

_RETRYABLE = (BackendTimeout, BackendRejected, DimensionMismatch)


def _retry_variant(cmd: EditCommand, scene: SceneState) -> Optional[EditCommand]:
    """Adapt a sub-goal for re-execution against the current (wrong) state.

    An Add whose object now exists becomes a Replace of that object; a
    Remove of an already-absent object is dropped; a Replace whose target is
    gone retargets the replacement object if it exists.
    """
    from .scene import Remove, Replacement
    if isinstance(cmd, Add) and scene.has(cmd.spec.object_id):
        s = cmd.spec
        return Replace(s.object_id, Replacement(
            name=s.name, color=s.color, size=s.size, material=s.material,
            shape=s.shape, bbox=s.bbox, object_id=s.object_id))
    if isinstance(cmd, Remove) and not scene.has(cmd.object_id):
        return None
    if isinstance(cmd, Replace) and not scene.has(cmd.object_id):
        new_id = cmd.replacement.object_id or cmd.replacement.name
        if scene.has(new_id):
            return Replace(new_id, cmd.replacement)
        return None
    return cmd


@dataclass(frozen=True)
class Plan:
    sub_goals: tuple[EditCommand, ...]
    rationale: str
    source: str  # rule_based | llm

    def __post_init__(self):
        if not self.sub_goals:
            raise ValueError("a plan needs at least one sub-goal")
        targets = [command_target(c) for c in self.sub_goals
                   if command_target(c) is not None]
        if len(targets) != len(set(targets)):
            raise ValueError("plan sub-goals conflict on an object")


@dataclass(frozen=True)
class TurnOutcome:
    status: str  # committed | rolled_back | failed
    attempts: int
    final_uri: str
    action_context: Optional[ActionContext] = None
    failing: tuple[tuple[str, str], ...] = ()
    error: Optional[str] = None

    def __post_init__(self):
        if (self.status == "committed") != (self.action_context is not None):
            raise ValueError("committed iff an action context is present")


class LlmPlannerClient:
    """Chat-completion-style HTTP client; the model must answer in the DSL.

    When transcript_path is set, every request/response pair is appended as
    a JSON line, and ReplayLlmClient can play the file back for tests.
    """

    SYSTEM_PROMPT = (
        "You are an image-editing planner. Answer ONLY with a program in the "
        "canonical edit DSL (statements separated by ';'): "
        "add(name, shape=, color=, size=, material=, at=(x,y,w,h)) | "
        "remove(id) | replace(id, name=, ...) | adjust(id, attr=value) | undo()."
    )

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None,
                 timeout: float = 30.0, transcript_path: Optional[str] = None):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.transcript_path = transcript_path

    def complete(self, instruction: str, memory_doc: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.SYSTEM_PROMPT},
                {"role": "user", "content": f"{memory_doc}\n\nInstruction: {instruction}"},
            ],
        }
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers,
                                 timeout=self.timeout)
        except requests.RequestException as exc:
            raise LlmUnavailable(f"planner endpoint unreachable: {exc}") from exc
        if resp.status_code // 100 != 2:
            raise LlmUnavailable(f"planner endpoint returned {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:
            raise LlmUnavailable(f"malformed completion payload: {exc}") from exc
        if self.transcript_path:
            import json as _json
            with open(self.transcript_path, "a", encoding="utf-8") as f:
                f.write(_json.dumps({"request": body, "response": content},
                                    sort_keys=True) + "\n")
        return content


class ReplayLlmClient:
    """Plays back a recorded transcript file in order (fixture replay)."""

    def __init__(self, transcript_path: str):
        import json as _json
        with open(transcript_path, encoding="utf-8") as f:
            self._responses = [_json.loads(line)["response"]
                               for line in f if line.strip()]
        self._cursor = 0

    def complete(self, instruction: str, memory_doc: str) -> str:
        if self._cursor >= len(self._responses):
            raise LlmUnavailable("transcript exhausted")
        content = self._responses[self._cursor]
        self._cursor += 1
        return content


def plan(instruction: str, state: SceneState, memory_doc: str, mode: str,
         llm_client: Optional[LlmPlannerClient] = None,
         max_subgoals: int = 8) -> Plan:
    """Turn an instruction into sub-goals.

    rule_based treats the instruction as DSL; llm asks the endpoint for DSL
    and validates it locally through the same parser.
    """
    if mode == "rule_based":
        dsl_text = instruction
        rationale = "parsed canonical instruction"
        source = "rule_based"
    elif mode == "llm":
        if llm_client is None:
            raise LlmUnavailable("no planner endpoint configured")
        dsl_text = llm_client.complete(instruction, memory_doc)
        rationale = "llm-proposed program, locally validated"
        source = "llm"
    else:
        raise ValueError(f"unknown planner mode {mode!r}")
    try:
        commands = parse_canonical(dsl_text)
    except (DslSyntaxError, DslSemanticError) as exc:
        err = ParseFailed(f"plan is not valid DSL: {exc}")
        err.line = getattr(exc, "line", None)
        err.column = getattr(exc, "column", None)
        raise err from exc
    if len(commands) > max_subgoals:
        raise PlanTooLarge(len(commands), max_subgoals)
    return Plan(sub_goals=tuple(commands), rationale=rationale, source=source)


def quality_test(perceived: SceneState, target: SceneState,
                 edited_ids: set[str]) -> tuple[bool, list[tuple[str, str]]]:
    """Pass iff the perceived state matches the target exactly.

    The failing list names every violated (object, attribute); missing or
    spurious objects are reported as (id, "existence"). edited_ids is used
    by callers to decide which sub-goals to retry.
    """
    diff = diff_states(perceived, target)
    failing = [(oid, fieldname) for oid, fieldname, _o, _n in diff.changed]
    failing += [(oid, "existence") for oid in sorted(diff.added_ids)]
    failing += [(oid, "existence") for oid in sorted(diff.removed_ids)]
    return (not failing), failing


# --- perception providers -------------------------------------------------------

class SymbolicPerception:
    """Reads the post-state the executor stored for this turn.

    The stored_scene argument, not the graph node, is authoritative: two
    different symbolic states can render to byte-identical pixels (a fully
    occluded attribute change), in which case content addressing reuses an
    older node whose scene snapshot is stale.
    """

    def perceive(self, image: np.ndarray, node: ImageContext,
                 stored_scene: Optional[SceneState]) -> SceneState:
        if stored_scene is not None:
            return stored_scene
        if node.scene_ref is None:
            raise ProviderUnavailable("node carries no scene state")
        return node.scene_ref


class ScriptedPerception:
    """Static-fixture mock: pops scripted states; None entries mean 'truth'."""

    def __init__(self, script: list[Optional[SceneState]]):
        self.script = list(script)
        self._truth = SymbolicPerception()

    def perceive(self, image: np.ndarray, node: ImageContext,
                 stored_scene: Optional[SceneState]) -> SceneState:
        if self.script:
            scripted = self.script.pop(0)
            if scripted is not None:
                return scripted
        return self._truth.perceive(image, node, stored_scene)


# --- session --------------------------------------------------------------------

@dataclass
class SessionConfig:
    backend: str = "symbolic"          # symbolic | remote | degrading
    planner_mode: str = "rule_based"   # rule_based | llm
    feather_sigma: Optional[float] = 0.0
    margin: Optional[int] = None
    padding: int = 16
    retry_budget: int = 3
    max_subgoals: int = 8
    turn_limit: int = 10
    turn_timeout_s: float = 120.0
    degrade_seed: int = 0
    remote_endpoint: Optional[str] = None
    remote_token: Optional[str] = None

    def executor_config(self) -> ExecutorConfig:
        return ExecutorConfig(feather_sigma=self.feather_sigma,
                              margin=self.margin, padding=self.padding)

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "planner_mode": self.planner_mode,
            "feather_sigma": self.feather_sigma,
            "margin": self.margin,
            "padding": self.padding,
            "retry_budget": self.retry_budget,
            "max_subgoals": self.max_subgoals,
            "turn_limit": self.turn_limit,
            "turn_timeout_s": self.turn_timeout_s,
            "degrade_seed": self.degrade_seed,
        }


def build_backend(config: SessionConfig):
    if config.backend == "symbolic":
        return SymbolicBackend()
    if config.backend == "degrading":
        return DegradingBackend(seed=config.degrade_seed)
    if config.backend == "remote":
        return RemoteBackend(config.remote_endpoint or "",
                             auth_token=config.remote_token)
    raise ValueError(f"unknown backend {config.backend!r}")


class EditSession:
    """One multi-turn editing session over a single state graph."""

    def __init__(self, initial_scene: SceneState, config: SessionConfig,
                 backend=None, perception=None,
                 llm_client: Optional[LlmPlannerClient] = None,
                 log: Optional[SessionLog] = None,
                 debug_log: Optional[DebugLog] = None,
                 blobs: Optional[BlobStore] = None):
        self.config = config
        self.backend = backend if backend is not None else build_backend(config)
        self.perception = perception if perception is not None else SymbolicPerception()
        self.llm_client = llm_client
        self.log = log
        self.debug = debug_log if debug_log is not None else DebugLog(path=None)
        self.blobs = blobs if blobs is not None else BlobStore()
        self.graph = StateGraph()
        self.status = "open"
        self.current_scene = initial_scene

        pixels = render(initial_scene, initial_scene.canvas_w, initial_scene.canvas_h)
        root = record_image(self.graph, encode_png(pixels), None, "root",
                            self._describe_scene(initial_scene),
                            scene_ref=initial_scene, blobs=self.blobs)
        self.graph.head_uri = root.uri
        # Committed turn boundaries, root first; (uri, scene) pairs. Undo as
        # a planned command reverts to the previous boundary, exactly the
        # stack semantics the benchmark engine uses.
        self._head_stack: list[tuple[str, SceneState]] = [(root.uri, initial_scene)]
        if self.log:
            self.log.log_node(root)
            self.log.log_head(root.uri, "root")

    @classmethod
    def from_replay(cls, graph: StateGraph, config: SessionConfig,
                    blobs: BlobStore, backend=None, perception=None,
                    llm_client=None, log: Optional[SessionLog] = None,
                    debug_log: Optional[DebugLog] = None) -> "EditSession":
        """Rebuild a session around a replayed graph (crash recovery)."""
        session = cls.__new__(cls)
        session.config = config
        session.backend = backend if backend is not None else build_backend(config)
        session.perception = perception if perception is not None else SymbolicPerception()
        session.llm_client = llm_client
        session.log = log
        session.debug = debug_log if debug_log is not None else DebugLog(path=None)
        session.blobs = blobs
        session.graph = graph
        session.status = "open"
        head = graph.node(graph.head_uri) if graph.head_uri else None
        session.current_scene = head.scene_ref if head else None
        # Recovery approximates turn boundaries by the head's lineage.
        from .history import lineage as _lineage
        session._head_stack = [(n.uri, n.scene_ref)
                               for n in _lineage(graph, graph.head_uri)] \
            if graph.head_uri else []
        return session

    @staticmethod
    def _describe_scene(scene: SceneState) -> str:
        things = ", ".join(f"{o.size} {o.color} {o.name}" for o in scene.objects)
        return f"scene with {len(scene.objects)} objects: {things}" if things \
            else "empty scene"

    # -- helpers -----------------------------------------------------------

    def head_node(self) -> ImageContext:
        return self.graph.node(self.graph.head_uri)

    def head_image(self) -> np.ndarray:
        return decode_png(self.blobs.get(self.graph.head_uri))

    def close(self):
        self.status = "closed"

    def memory_document(self, budget_hint: Optional[int] = None) -> str:
        return render_memory(self.graph, budget_hint)

    def _simulate_target(self, start_scene: SceneState,
                         commands: tuple[EditCommand, ...]) -> SceneState:
        """Symbolic post-state of the whole turn, undo included."""
        stack = [scene for _uri, scene in self._head_stack]
        stack[-1] = start_scene
        for cmd in commands:
            if isinstance(cmd, Undo):
                if len(stack) < 2:
                    raise UnknownParent("undo at the root: no previous state")
                stack.pop()
            else:
                stack.append(apply_transition(stack[-1], [cmd]))
        return stack[-1]

    @staticmethod
    def _edited_ids(start_scene: SceneState, target: SceneState,
                    commands: tuple[EditCommand, ...]) -> set[str]:
        ids = diff_states(start_scene, target).ids_touched()
        for cmd in commands:
            target_id = command_target(cmd)
            if target_id is not None:
                ids.add(target_id)
            if isinstance(cmd, Replace):
                ids.add(cmd.replacement.object_id or cmd.replacement.name)
        return ids

    def _restore_head(self, uri: str):
        self.graph.head_uri = uri

    # -- the turn loop -------------------------------------------------------

    def run_turn(self, instruction: str, dsl: Optional[str] = None) -> TurnOutcome:
        if self.status != "open":
            raise SessionClosed("session is closed")
        if len(self.graph.actions) >= self.config.turn_limit:
            raise SessionClosed(f"turn limit {self.config.turn_limit} reached")

        start_uri = self.graph.head_uri
        start_scene = self.current_scene if self.current_scene is not None \
            else self.head_node().scene_ref

        try:
            the_plan = plan(dsl if dsl is not None else instruction,
                            start_scene, self.memory_document(),
                            self.config.planner_mode, self.llm_client,
                            self.config.max_subgoals)
            target = self._simulate_target(start_scene, the_plan.sub_goals)
        except EditLoopError as exc:
            self._restore_head(start_uri)
            return TurnOutcome(status="failed", attempts=0, final_uri=start_uri,
                               error=str(exc))

        edited_ids = self._edited_ids(start_scene, target, the_plan.sub_goals)
        exec_config = self.config.executor_config()
        tool_contexts: list[ToolContext] = []
        executed_uris: list[str] = []

        working_uri = start_uri
        working_scene = start_scene
        working_image = self.head_image()
        turn_stack = list(self._head_stack)
        pending = list(the_plan.sub_goals)
        attempt = 1
        last_failing: tuple = ()
        deadline = time.monotonic() + self.config.turn_timeout_s

        while True:
            # Cooperative turn budget, checked at attempt boundaries: a
            # single-process service cannot safely kill a running edit.
            if time.monotonic() > deadline:
                timeout = EditLoopError(
                    f"turn exceeded {self.config.turn_timeout_s:.0f}s budget")
                return self._roll_back(start_uri, start_scene, attempt,
                                       last_failing, timeout)
            failure: Optional[Exception] = None
            while pending:
                cmd = pending[0]
                undo_target = None
                if isinstance(cmd, Undo):
                    if len(turn_stack) < 2:
                        self._restore_head(start_uri)
                        self.current_scene = start_scene
                        return TurnOutcome(status="failed", attempts=attempt,
                                           final_uri=start_uri,
                                           error="undo at the root: no previous state")
                    undo_target = turn_stack[-2][0]
                try:
                    pre_nodes = set(self.graph.nodes)
                    result = execute_atomic(working_image, working_scene, cmd,
                                            self.backend, self.graph,
                                            parent_uri=working_uri,
                                            blobs=self.blobs, config=exec_config,
                                            undo_target_uri=undo_target)
                except _RETRYABLE as exc:
                    failure = exc
                    tool_contexts.append(ToolContext(
                        tool_name=command_kind(cmd),
                        parameters={"command": command_to_json(cmd)},
                        thought=f"attempt {attempt}: backend refused",
                        referenced_uris=(working_uri,),
                        status="failed",
                        attempt_index=attempt,
                    ))
                    break
                except EditLoopError as exc:
                    self._restore_head(start_uri)
                    self.current_scene = start_scene
                    return TurnOutcome(status="failed", attempts=attempt,
                                       final_uri=start_uri, error=str(exc))
                pending.pop(0)
                if isinstance(cmd, Undo):
                    turn_stack.pop()
                if self.log and result.node.uri not in pre_nodes:
                    self.log.log_node(result.node)
                tool_contexts.append(ToolContext(
                    tool_name=command_kind(cmd),
                    parameters={"command": command_to_json(cmd),
                                "padding": exec_config.padding,
                                "feather_sigma": exec_config.feather_sigma,
                                "margin": exec_config.margin,
                                "backend_attempts": result.attempts_used},
                    thought=f"attempt {attempt}: applied {command_kind(cmd)}",
                    referenced_uris=(working_uri, result.node.uri),
                    status="succeeded",
                    attempt_index=attempt,
                ))
                working_uri = result.node.uri
                working_scene = result.scene
                working_image = result.image
                executed_uris.append(result.node.uri)

            if failure is None:
                perceived = self.perception.perceive(
                    working_image, self.graph.node(working_uri), working_scene)
                ok, failing = quality_test(perceived, target, edited_ids)
                if ok:
                    return self._commit(instruction, the_plan, start_uri,
                                        working_uri, working_scene,
                                        turn_stack, tool_contexts, attempt)
                last_failing = tuple(failing)
                failing_ids = {oid for oid, _ in failing}
                retry_goals = [c for c in the_plan.sub_goals
                               if command_target(c) in failing_ids]
                if not retry_goals:
                    retry_goals = [c for c in the_plan.sub_goals
                                   if not isinstance(c, Undo)]
                pending = [v for v in
                           (_retry_variant(c, working_scene) for c in retry_goals)
                           if v is not None]
                if not pending and attempt > self.config.retry_budget:
                    return self._roll_back(start_uri, start_scene, attempt,
                                           last_failing, None)

            if attempt > self.config.retry_budget:
                return self._roll_back(start_uri, start_scene, attempt,
                                       last_failing, failure)
            attempt += 1

    def _commit(self, instruction, the_plan, start_uri, working_uri,
                working_scene, turn_stack, tool_contexts, attempt) -> TurnOutcome:
        chain = self._accepted_chain(start_uri, working_uri, tool_contexts)
        action = fold_turn(self.graph, tool_contexts, intent=instruction,
                           verified_commands=list(the_plan.sub_goals),
                           key_image_uris=chain, debug_log=self.debug)
        self.graph.head_uri = working_uri
        self.current_scene = working_scene
        if working_uri != turn_stack[-1][0]:
            turn_stack.append((working_uri, working_scene))
        self._head_stack = turn_stack
        if self.log:
            self.log.log_action(action)
            self.log.log_head(working_uri, "commit")
        return TurnOutcome(status="committed", attempts=attempt,
                           final_uri=working_uri, action_context=action)

    def _accepted_chain(self, start_uri, working_uri, tool_contexts) -> list[str]:
        executed = {uri for tc in tool_contexts if tc.status == "succeeded"
                    for uri in tc.referenced_uris}
        chain = [working_uri]
        node = self.graph.node(working_uri)
        while node.parent_uri is not None and node.parent_uri in executed \
                and node.parent_uri != start_uri:
            chain.append(node.parent_uri)
            node = self.graph.node(node.parent_uri)
        chain.reverse()
        return chain

    def _roll_back(self, start_uri, start_scene, attempts, failing,
                   failure) -> TurnOutcome:
        self.graph.head_uri = start_uri
        self.current_scene = start_scene
        if self.log:
            self.log.log_head(start_uri, "rollback")
        error = str(failure) if failure is not None else None
        return TurnOutcome(status="rolled_back", attempts=attempts,
                           final_uri=start_uri, failing=failing, error=error)

    # -- user-level undo (outside a turn) -------------------------------------

    def undo(self, target_uri: Optional[str] = None) -> ImageContext:
        """Move the head back (default: to its parent) and log the move."""
        if self.status != "open":
            raise SessionClosed("session is closed")
        if target_uri is None:
            head = self.head_node()
            if head.parent_uri is None:
                raise UnknownParent("undo at the root: no previous state")
            target_uri = head.parent_uri
        node = self.graph.node(target_uri)
        self.graph.head_uri = target_uri
        self.current_scene = node.scene_ref
        boundary_uris = [uri for uri, _scene in self._head_stack]
        if target_uri in boundary_uris:
            idx = boundary_uris.index(target_uri)
            self._head_stack = self._head_stack[:idx + 1]
        else:
            from .history import lineage as _lineage
            self._head_stack = [(n.uri, n.scene_ref)
                                for n in _lineage(self.graph, target_uri)]
        if self.log:
            self.log.log_head(target_uri, "rollback")
        return node
