"""Planner loop: planning, quality testing, retries, commit/rollback."""

from fractions import Fraction

import pytest

from editloop.backends import SymbolicBackend
from editloop.errors import (
    BackendRejected,
    LlmUnavailable,
    ParseFailed,
    PlanTooLarge,
    SessionClosed,
)
from editloop.history import lineage
from editloop.planning import (
    EditSession,
    LlmPlannerClient,
    Plan,
    ScriptedPerception,
    SessionConfig,
    plan,
    quality_test,
)
from editloop.rng import DetRng
from editloop.scene import (
    Adjust,
    ObjectSpec,
    SceneState,
    apply_transition,
)

from conftest import random_state
from mockserver import ScriptedServer


def obj(oid, color="red", size="medium", material="matte", shape="rectangle",
        bbox=(Fraction(1, 8), Fraction(1, 8), Fraction(1, 4), Fraction(1, 4)), z=1):
    return ObjectSpec(object_id=oid, name=oid, color=color, size=size,
                      material=material, shape=shape, bbox=bbox, z_order=z)


def scene(*objects, background="white", w=64, h=64):
    return SceneState(objects=tuple(objects), canvas_w=w, canvas_h=h,
                      background=background)


def two_object_scene():
    return scene(obj("cooler", color="bright-blue"),
                 obj("crate", color="maroon",
                     bbox=(Fraction(5, 8), Fraction(5, 8), Fraction(1, 4), Fraction(1, 4)),
                     z=2))


class TestPlan:
    def test_rule_based_single_adjust(self):
        s = two_object_scene()
        p = plan("adjust(cooler, color=teal)", s, "", "rule_based")
        assert p.sub_goals == (Adjust("cooler", "color", "teal"),)
        assert p.source == "rule_based"

    def test_llm_mode_matches_rule_based_on_same_dsl(self):
        dsl = "adjust(cooler, color=teal); remove(crate)"
        s = two_object_scene()

        def completion(body):
            assert body["messages"][1]["content"].endswith("make it calmer")
            return 200, {"choices": [{"message": {"content": dsl}}]}

        with ScriptedServer() as server:
            server.default = completion
            client = LlmPlannerClient(server.url, model="mock")
            p_llm = plan("make it calmer", s, "memory", "llm", llm_client=client)
        p_rule = plan(dsl, s, "", "rule_based")
        assert p_llm.sub_goals == p_rule.sub_goals
        assert p_llm.source == "llm"

    def test_llm_malformed_dsl_is_parse_failed(self):
        with ScriptedServer() as server:
            server.default = lambda b: (
                200, {"choices": [{"message": {"content": "please adjust the thing"}}]})
            client = LlmPlannerClient(server.url, model="mock")
            with pytest.raises(ParseFailed):
                plan("do it", two_object_scene(), "", "llm", llm_client=client)

    def test_llm_unreachable(self):
        client = LlmPlannerClient("http://127.0.0.1:9/", model="mock", timeout=0.2)
        with pytest.raises(LlmUnavailable):
            plan("x", two_object_scene(), "", "llm", llm_client=client)

    def test_plan_too_large(self):
        dsl = "; ".join(f"adjust(o{i}, color=red)" for i in range(9))
        with pytest.raises(PlanTooLarge):
            plan(dsl, two_object_scene(), "", "rule_based")

    def test_plan_conservatism(self):
        dsl = "adjust(cooler, color=teal); remove(crate)"
        p = plan(dsl, two_object_scene(), "", "rule_based")
        from editloop.scene import command_target
        assert {command_target(c) for c in p.sub_goals} <= {"cooler", "crate"}


class TestQualityTest:
    def test_identical_states_pass(self):
        s = two_object_scene()
        ok, failing = quality_test(s, s, {"cooler"})
        assert ok and failing == []

    def test_single_mismatch(self):
        target = apply_transition(two_object_scene(),
                                  [Adjust("cooler", "color", "sea-foam-green")])
        perceived = two_object_scene()  # still bright-blue
        ok, failing = quality_test(perceived, target, {"cooler"})
        assert not ok
        assert failing == [("cooler", "color")]

    def test_bystander_change_listed(self):
        s = two_object_scene()
        target = apply_transition(s, [Adjust("cooler", "color", "teal")])
        perceived = apply_transition(
            s, [Adjust("cooler", "color", "teal"), Adjust("crate", "color", "pink")])
        ok, failing = quality_test(perceived, target, {"cooler"})
        assert not ok
        assert ("crate", "color") in failing


def make_session(s=None, **config_kwargs):
    return EditSession(s or two_object_scene(), SessionConfig(**config_kwargs))


class FailingBackend:
    """Raises BackendRejected for the first n calls, then delegates."""

    scope = "patch"

    def __init__(self, failures, inner=None):
        self.failures = failures
        self.inner = inner or SymbolicBackend()

    def edit(self, request):
        if self.failures > 0:
            self.failures -= 1
            raise BackendRejected("scripted failure")
        return self.inner.edit(request)


class TestRunTurn:
    def test_two_subgoal_turn_commits_first_try(self):
        session = make_session()
        dsl = "adjust(cooler, color=sea-foam-green); adjust(crate, color=black)"
        outcome = session.run_turn(dsl)
        assert outcome.status == "committed"
        assert outcome.attempts == 1
        expected = apply_transition(
            apply_transition(two_object_scene(),
                             [Adjust("cooler", "color", "sea-foam-green")]),
            [Adjust("crate", "color", "black")])
        final_scene = session.graph.node(outcome.final_uri).scene_ref
        assert final_scene.objects == expected.objects

    def test_backend_corrupting_first_attempt_commits_on_second(self):
        s = two_object_scene()
        session = EditSession(s, SessionConfig(retry_budget=3),
                              backend=FailingBackend(1))
        outcome = session.run_turn("adjust(cooler, color=teal)")
        assert outcome.status == "committed"
        assert outcome.attempts == 2
        failed = [r for r in session.debug.records if r["status"] == "failed"]
        assert len(failed) == 1

    def test_backend_always_failing_rolls_back(self):
        s = two_object_scene()
        session = EditSession(s, SessionConfig(retry_budget=2),
                              backend=FailingBackend(99))
        start = session.graph.head_uri
        nodes_before = set(session.graph.nodes)
        outcome = session.run_turn("adjust(cooler, color=teal)")
        assert outcome.status == "rolled_back"
        assert session.graph.head_uri == start
        assert set(session.graph.nodes) == nodes_before
        assert outcome.attempts == 3  # initial + 2 retries

    def test_quality_failure_retries_with_scripted_perception(self):
        s = two_object_scene()
        wrong = s  # perceived as unchanged on the first look
        session = EditSession(s, SessionConfig(retry_budget=3),
                              perception=ScriptedPerception([wrong, None]))
        outcome = session.run_turn("adjust(cooler, color=teal)")
        assert outcome.status == "committed"
        assert outcome.attempts == 2

    def test_quality_never_passing_rolls_back_with_failures(self):
        s = two_object_scene()
        session = EditSession(s, SessionConfig(retry_budget=1),
                              perception=ScriptedPerception([s, s, s, s, s]))
        start = session.graph.head_uri
        outcome = session.run_turn("adjust(cooler, color=teal)")
        assert outcome.status == "rolled_back"
        assert outcome.attempts == 2
        assert ("cooler", "color") in outcome.failing
        assert session.graph.head_uri == start

    def test_parse_error_fails_without_side_effects(self):
        session = make_session()
        nodes = set(session.graph.nodes)
        outcome = session.run_turn("adjust(cooler color=teal)")
        assert outcome.status == "failed"
        assert set(session.graph.nodes) == nodes
        assert session.graph.head_uri == outcome.final_uri

    def test_unknown_object_fails_cleanly(self):
        session = make_session()
        outcome = session.run_turn("adjust(ghost, color=teal)")
        assert outcome.status == "failed"
        assert "ghost" in outcome.error

    def test_undo_turn_reverts_head(self):
        session = make_session()
        first = session.run_turn("adjust(cooler, color=teal)")
        root = lineage(session.graph, first.final_uri)[0].uri
        outcome = session.run_turn("undo()")
        assert outcome.status == "committed"
        assert outcome.final_uri == root

    def test_folding_discipline_one_action_per_commit(self):
        s = two_object_scene()
        session = EditSession(s, SessionConfig(retry_budget=3),
                              backend=FailingBackend(2))
        session.run_turn("adjust(cooler, color=teal)")
        assert len(session.graph.actions) == 1
        session2 = EditSession(s, SessionConfig())
        session2.run_turn("adjust(cooler, color=teal)")
        assert len(session2.graph.actions) == 1

    def test_commit_or_restore_randomized(self):
        rng = DetRng(303)
        for trial in range(10):
            s = random_state(rng, n_objects=2, canvas=(64, 64))
            failures = rng.randint(0, 5)
            session = EditSession(s, SessionConfig(retry_budget=2),
                                  backend=FailingBackend(failures))
            pre_head = session.graph.head_uri
            oid = s.ids()[0]
            new_color = "teal" if s.get(oid).color != "teal" else "lime"
            outcome = session.run_turn(f"adjust({oid}, color={new_color})")
            assert outcome.attempts <= 3
            if outcome.status == "committed":
                assert session.graph.head_uri == outcome.final_uri != pre_head
            else:
                assert session.graph.head_uri == pre_head

    def test_closed_session_raises(self):
        session = make_session()
        session.close()
        with pytest.raises(SessionClosed):
            session.run_turn("remove(crate)")

    def test_turn_limit(self):
        session = make_session(turn_limit=1)
        session.run_turn("adjust(cooler, color=teal)")
        with pytest.raises(SessionClosed):
            session.run_turn("adjust(cooler, color=lime)")


class TestLlmTranscripts:
    def test_record_then_replay(self, tmp_path):
        from editloop.planning import ReplayLlmClient
        dsl = "adjust(cooler, color=teal)"
        path = str(tmp_path / "transcript.jsonl")
        with ScriptedServer() as server:
            server.default = lambda b: (
                200, {"choices": [{"message": {"content": dsl}}]})
            live = LlmPlannerClient(server.url, model="mock",
                                    transcript_path=path)
            assert live.complete("make it teal", "memory") == dsl
        replay = ReplayLlmClient(path)
        p = plan("make it teal", two_object_scene(), "memory", "llm",
                 llm_client=replay)
        assert p.sub_goals == (Adjust("cooler", "color", "teal"),)
        with pytest.raises(LlmUnavailable):
            replay.complete("again", "")


class TestTurnTimeout:
    def test_exhausted_budget_rolls_back(self):
        import time as time_module

        class SlowBackend:
            scope = "patch"

            def __init__(self):
                self.inner = SymbolicBackend()

            def edit(self, request):
                time_module.sleep(0.05)
                return self.inner.edit(request)

        s = two_object_scene()
        session = EditSession(
            s, SessionConfig(retry_budget=50, turn_timeout_s=0.01),
            backend=SlowBackend(),
            perception=ScriptedPerception([s] * 60))  # never passes
        start = session.graph.head_uri
        outcome = session.run_turn("adjust(cooler, color=teal)")
        assert outcome.status == "rolled_back"
        assert "budget" in (outcome.error or "")
        assert session.graph.head_uri == start


class TestSessionUndo:
    def test_undo_then_edit_branches(self):
        session = make_session()
        first = session.run_turn("adjust(cooler, color=teal)")
        session.undo()
        root = session.graph.head_uri
        second = session.run_turn("adjust(cooler, color=lime)")
        children = [n for n in session.graph.nodes.values()
                    if n.parent_uri == root]
        assert len(children) == 2
        assert second.final_uri != first.final_uri

    def test_undo_at_root_rejected(self):
        session = make_session()
        from editloop.errors import UnknownParent
        with pytest.raises(UnknownParent):
            session.undo()
