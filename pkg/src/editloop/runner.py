"""Batch orchestration: generate benchmark directories, run systems over
them, and evaluate the outputs.

Output layout per session (consumed by the evaluator):

    <outputs>/<session-name>/
        images/t{t}.png    # committed post-turn image
        states/t{t}.json   # perceived post-turn state
        run_manifest.json  # config echo + per-turn outcome (no timestamps)

A turn that rolled back or failed writes no image/state for that turn; the
evaluator scores it as a total failure.
"""

from __future__ import annotations

import json
import os
from typing import Optional

from .history import DebugLog, SessionLog
from .metrics import (
    GradientMagnitudeProvider,
    TurnScore,
    evaluate_session,
    mean_turn_series,
    summarize,
)
from .planning import EditSession, SessionConfig, TurnOutcome, build_backend
from .rng import derive_seed
from .scene import dumps_state
from .synth import Session, SessionSpec, build_session, load_session, write_session

SCHEMA_VERSION = 1


def generate_benchmark(seeds, out_dir: str, n_turns: int = 3,
                       canvas: tuple[int, int] = (256, 256),
                       n_objects_range: tuple[int, int] = (2, 5),
                       intent_mix_prob: float = 0.3) -> list[str]:
    """Write one session directory per seed; returns the directory names."""
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for seed in seeds:
        spec = SessionSpec(seed=seed, n_turns=n_turns, canvas=canvas,
                           n_objects_range=n_objects_range,
                           intent_mix_prob=intent_mix_prob)
        session = build_session(spec)
        name = f"session-{seed:08d}"
        write_session(session, os.path.join(out_dir, name))
        names.append(name)
    return names


def _session_backend(config: SessionConfig, session_seed: int):
    if config.backend == "degrading":
        from .backends import DegradingBackend
        return DegradingBackend(seed=derive_seed(config.degrade_seed, session_seed))
    return build_backend(config)


def run_bench_session(session: Session, config: SessionConfig, out_dir: str,
                      llm_client=None, backend=None, perception=None,
                      log_path: Optional[str] = None,
                      debug_path: Optional[str] = None) -> list[TurnOutcome]:
    """Drive one benchmark session through the edit loop and write outputs."""
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "states"), exist_ok=True)
    if backend is None:
        backend = _session_backend(config, session.spec.seed)
    edit_session = EditSession(
        session.states[0], config, backend=backend, perception=perception,
        llm_client=llm_client,
        log=SessionLog(log_path) if log_path else None,
        debug_log=DebugLog(debug_path) if debug_path else None,
    )
    outcomes = []
    for t in range(1, session.n_turns + 1):
        instruction = session.instructions[t - 1]
        dsl = session.dsl[t - 1] if config.planner_mode == "rule_based" else None
        outcome = edit_session.run_turn(instruction, dsl=dsl)
        outcomes.append(outcome)
        if outcome.status == "committed":
            node = edit_session.graph.node(outcome.final_uri)
            png = edit_session.blobs.get(outcome.final_uri)
            with open(os.path.join(out_dir, "images", f"t{t}.png"), "wb") as f:
                f.write(png)
            with open(os.path.join(out_dir, "states", f"t{t}.json"), "w",
                      encoding="utf-8") as f:
                f.write(dumps_state(node.scene_ref))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_json(),
        "session_seed": session.spec.seed,
        "outcomes": [{"turn": i + 1, "status": o.status, "attempts": o.attempts,
                      "final_uri": o.final_uri} for i, o in enumerate(outcomes)],
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return outcomes


def list_session_dirs(bench_dir: str) -> list[str]:
    from .errors import LayoutError
    if not os.path.isdir(bench_dir):
        raise LayoutError(f"benchmark directory {bench_dir!r} does not exist")
    names = sorted(d for d in os.listdir(bench_dir)
                   if os.path.isdir(os.path.join(bench_dir, d))
                   and os.path.exists(os.path.join(bench_dir, d, "manifest.json")))
    if not names:
        raise LayoutError(f"no session directories under {bench_dir!r}")
    return names


def run_benchmark(bench_dir: str, outputs_dir: str, config: SessionConfig,
                  llm_client=None, perception=None) -> dict[str, list[TurnOutcome]]:
    """Run every session in a benchmark directory; returns outcomes by name."""
    results = {}
    for name in list_session_dirs(bench_dir):
        session = load_session(os.path.join(bench_dir, name))
        results[name] = run_bench_session(
            session, config, os.path.join(outputs_dir, name),
            llm_client=llm_client, perception=perception,
            log_path=os.path.join(outputs_dir, name, "log.jsonl"),
            debug_path=os.path.join(outputs_dir, name, "debug.jsonl"))
    return results


def evaluate_benchmark(bench_dir: str, outputs_dir: str,
                       provider=None) -> dict:
    """Score every session; returns a JSON-ready report document."""
    if provider is None:
        provider = GradientMagnitudeProvider()
    sessions = {}
    all_scores: list[list[TurnScore]] = []
    for name in list_session_dirs(bench_dir):
        scores, summary = evaluate_session(os.path.join(bench_dir, name),
                                           os.path.join(outputs_dir, name),
                                           provider=provider)
        sessions[name] = {
            "turns": [s.to_json() for s in scores],
            "summary": summary,
        }
        all_scores.append(scores)
    flat = [s for scores in all_scores for s in scores]
    report = {
        "schema_version": SCHEMA_VERSION,
        "perceptual_provider": provider.name,
        "sessions": sessions,
        "overall": summarize(flat) if flat else {},
    }
    if all_scores and len({len(s) for s in all_scores}) == 1:
        report["turn_series"] = mean_turn_series(all_scores)
    return report


def write_report(report: dict, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, sort_keys=True, indent=2)
        f.write("\n")


def report_text_table(report: dict) -> str:
    lines = [f"{'session':<20} {'IF':>6} {'IC':>6} {'PSNR_OM':>8} {'SSIM_OM':>8}"]
    for name, entry in report["sessions"].items():
        s = entry["summary"]
        lines.append(f"{name:<20} {s['if_score']:>6.3f} {s['ic_score']:>6.3f} "
                     f"{s['psnr_om']:>8.2f} {s['ssim_om']:>8.4f}")
    o = report["overall"]
    lines.append(f"{'OVERALL':<20} {o['if_score']:>6.3f} {o['ic_score']:>6.3f} "
                 f"{o['psnr_om']:>8.2f} {o['ssim_om']:>8.4f}")
    return "\n".join(lines)
