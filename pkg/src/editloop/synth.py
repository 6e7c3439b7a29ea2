"""Seeded benchmark engine: initial scenes, per-turn command sampling,
template paraphrasing, and complete session directories.

Everything is a pure function of (seed, spec) through the counter-based
generator in rng.py, so a session can be regenerated bit-for-bit anywhere.
The natural-language instruction is surface decoration only: the canonical
DSL rides along as ground truth and evaluation never depends on phrasing.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace as dc_replace
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources
from typing import Optional

import numpy as np

from .dsl import format_program, parse_canonical
from .errors import LayoutError, Unsatisfiable
from .images import content_uri, encode_png
from .raster import coverage_mask, painted_mask, render
from .rng import DetRng
from .scene import (
    Add,
    Adjust,
    EditCommand,
    ObjectSpec,
    Remove,
    Replace,
    Replacement,
    SceneState,
    Undo,
    apply_transition,
    command_kind,
    dumps_state,
    loads_state,
)
from .vocab import COLORS, MATERIALS, SHAPES, SIZES, human_phrase

SCHEMA_VERSION = 1

NOUN_LIST = (
    "cooler", "crate", "lamp", "ball", "book", "mug", "plant", "radio",
    "clock", "vase", "bottle", "pillow", "frame", "kite", "drum", "fan",
    "basket", "candle", "teapot", "banner", "stool", "globe", "jar", "brush",
)

_PLACEMENT_DENOM = 64          # placement grid granularity
_OCCLUSION_PROBE = 128         # probe resolution for the overlap bound
_MAX_OCCLUDED_FRACTION = 0.7


@dataclass(frozen=True)
class SessionSpec:
    seed: int
    n_turns: int = 3
    canvas: tuple[int, int] = (256, 256)
    n_objects_range: tuple[int, int] = (2, 5)
    intent_mix_prob: float = 0.3

    def __post_init__(self):
        if self.n_turns < 1:
            raise ValueError("n_turns must be >= 1")
        if self.canvas[0] < 16 or self.canvas[1] < 16:
            raise ValueError("canvas must be at least 16x16")
        if not (0 <= self.intent_mix_prob <= 1):
            raise ValueError("intent_mix_prob must be in [0, 1]")
        lo, hi = self.n_objects_range
        if not (1 <= lo <= hi <= len(NOUN_LIST) - 4):
            raise ValueError("bad n_objects_range")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_turns": self.n_turns,
            "canvas": list(self.canvas),
            "n_objects_range": list(self.n_objects_range),
            "intent_mix_prob": self.intent_mix_prob,
        }

    @staticmethod
    def from_json(doc: dict) -> "SessionSpec":
        return SessionSpec(
            seed=doc["seed"],
            n_turns=doc["n_turns"],
            canvas=tuple(doc["canvas"]),
            n_objects_range=tuple(doc["n_objects_range"]),
            intent_mix_prob=doc["intent_mix_prob"],
        )


@dataclass(frozen=True)
class ParaphraseRecord:
    text: str
    dsl: str


@dataclass
class Session:
    spec: SessionSpec
    states: list[SceneState]                 # s_0 .. s_T
    commands: list[list[EditCommand]]        # per turn, 1-based turns
    dsl: list[str]                           # canonical program per turn
    instructions: list[str]                  # paraphrased per turn
    images: list[bytes]                      # PNG bytes per state
    image_uris: list[str]

    @property
    def n_turns(self) -> int:
        return len(self.commands)


# --- initial scene synthesis ---------------------------------------------------

def _occlusion_ok(objects: list[ObjectSpec]) -> bool:
    """No object may be more than 70% hidden (probe-resolution measure).

    Visibility counts an object's shape footprint not covered by the paint
    of anything above it (pattern holes in an occluder do not hide what is
    underneath). Objects too small to resolve at probe scale pass; the real
    canvas is at least as fine.
    """
    if len(objects) < 2:
        return True
    probe = _OCCLUSION_PROBE
    footprints = [coverage_mask(o, probe, probe) for o in objects]
    paints = [painted_mask(o, probe, probe) for o in objects]
    order = sorted(range(len(objects)), key=lambda i: (objects[i].z_order, i))
    for pos, i in enumerate(order):
        own = footprints[i]
        total = own.sum()
        if total == 0:
            continue
        visible = own.copy()
        for j in order[pos + 1:]:
            visible &= ~paints[j]
        if 1.0 - visible.sum() / total > _MAX_OCCLUDED_FRACTION:
            return False
    return True


def _sample_bbox(rng: DetRng) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    q = _PLACEMENT_DENOM
    wn = rng.randint(q // 8, q // 3)
    hn = rng.randint(q // 8, q // 3)
    xn = rng.randint(0, q - wn)
    yn = rng.randint(0, q - hn)
    return (Fraction(xn, q), Fraction(yn, q), Fraction(wn, q), Fraction(hn, q))


def synth_initial_state(seed: int, spec: SessionSpec) -> SceneState:
    """Deterministic first scene: distinct names and colors, bounded overlap."""
    rng = DetRng(seed).fork("initial-state")
    lo, hi = spec.n_objects_range
    n = rng.randint(lo, hi)
    palette = rng.sample(COLORS, n + 1)
    background = palette[0]
    names = rng.sample(NOUN_LIST, n)
    objects: list[ObjectSpec] = []
    for i in range(n):
        base = dict(object_id=names[i], name=names[i], color=palette[i + 1],
                    size=rng.choice(SIZES), material=rng.choice(MATERIALS),
                    shape=rng.choice(SHAPES), z_order=i + 1)
        best = None
        for _try in range(50):
            candidate = ObjectSpec(bbox=_sample_bbox(rng), **base)
            if _occlusion_ok(objects + [candidate]):
                best = candidate
                break
        if best is None:
            raise Unsatisfiable(f"could not place object {names[i]} within bounds")
        objects.append(best)
    return SceneState(objects=tuple(objects), canvas_w=spec.canvas[0],
                      canvas_h=spec.canvas[1], background=background)


# --- per-turn command sampling ---------------------------------------------------

def _sample_adjust(rng: DetRng, target: ObjectSpec) -> Adjust:
    attr = rng.choice(("color", "size", "material", "shape"))
    vocab = {"color": COLORS, "size": SIZES,
             "material": MATERIALS, "shape": SHAPES}[attr]
    value = rng.choice([v for v in vocab if v != target.attribute(attr)])
    return Adjust(target.object_id, attr, value)


def _sample_add(rng: DetRng, state: SceneState, available: list[str]) -> Optional[Add]:
    if not available:
        return None
    name = rng.choice(available)
    for _try in range(50):
        bbox = _sample_bbox(rng)
        spec_obj = ObjectSpec(object_id=name, name=name, color=rng.choice(COLORS),
                              size=rng.choice(SIZES), material=rng.choice(MATERIALS),
                              shape=rng.choice(SHAPES), bbox=bbox, z_order=0)
        if _occlusion_ok(list(state.objects) + [dc_replace(
                spec_obj, z_order=state.max_z() + 1)]):
            return Add(spec_obj)
    return None


def _sample_replace(rng: DetRng, target: ObjectSpec,
                    available: list[str]) -> Optional[Replace]:
    if not available:
        return None
    name = rng.choice(available)
    return Replace(target.object_id, Replacement(
        name=name,
        color=rng.choice(COLORS),
        size=rng.choice(SIZES),
        material=rng.choice(MATERIALS),
        shape=rng.choice(SHAPES),
    ))


def sample_commands(state: SceneState, turn_index: int, seed: int,
                    spec: SessionSpec, allow_undo: bool = True) -> list[EditCommand]:
    """Valid command set for one turn, deterministic in (seed, turn_index).

    Undo appears only as a singleton turn, never on turn 1, and only when the
    caller confirms there is a state to return to. Adjusts never no-op; mixed
    turns target distinct objects.
    """
    rng = DetRng(seed).fork("commands", turn_index)
    if not state.objects and not [n for n in NOUN_LIST if not state.has(n)]:
        raise Unsatisfiable("no legal action for this state")

    if allow_undo and turn_index >= 2 and rng.random() < 0.12:
        return [Undo()]

    n_commands = 2 if (rng.random() < spec.intent_mix_prob
                       and len(state.objects) >= 2) else 1
    available = [n for n in NOUN_LIST if not state.has(n)]
    used_targets: set[str] = set()
    commands: list[EditCommand] = []
    sim = state
    for _ in range(n_commands):
        candidates = [o for o in sim.objects if o.object_id not in used_targets]
        picks = ["adjust", "adjust", "add", "replace", "remove"]
        for _try in range(20):
            kind = rng.choice(picks)
            if kind == "adjust" and candidates:
                cmd = _sample_adjust(rng, rng.choice(candidates))
            elif kind == "add":
                cmd = _sample_add(rng, sim, available)
                if cmd is None:
                    continue
                available = [n for n in available if n != cmd.spec.object_id]
            elif kind == "replace" and candidates and available:
                cmd = _sample_replace(rng, rng.choice(candidates), available)
                if cmd is None:
                    continue
                available = [n for n in available if n != cmd.replacement.name]
            elif kind == "remove" and len(sim.objects) >= 2 and candidates:
                cmd = Remove(rng.choice(candidates).object_id)
            else:
                continue
            break
        else:
            raise Unsatisfiable("no legal action found")
        commands.append(cmd)
        target = cmd.spec.object_id if isinstance(cmd, Add) else cmd.object_id
        used_targets.add(target)
        if isinstance(cmd, Replace):
            used_targets.add(cmd.replacement.name)
        sim = apply_transition(sim, [cmd])
    return commands


# --- paraphrasing -----------------------------------------------------------------

def _load_templates() -> dict:
    return json.loads(resources.files("editloop.data")
                      .joinpath("templates.json").read_text())


TEMPLATES = _load_templates()


def _zone(bbox) -> str:
    x, y, w, h = bbox
    cx, cy = x + w / 2, y + h / 2
    col = "left" if cx < Fraction(1, 3) else ("right" if cx > Fraction(2, 3) else "middle")
    row = "top" if cy < Fraction(1, 3) else ("bottom" if cy > Fraction(2, 3) else "center")
    if row == "center" and col == "middle":
        return "center"
    if col == "middle":
        return row
    return f"{row} {col}"


def _fill_template(cmd: EditCommand, rng: DetRng) -> str:
    kind = command_kind(cmd)
    template = rng.choice(TEMPLATES["variants"][kind])
    if isinstance(cmd, Adjust):
        return template.format(name=cmd.object_id, attr=cmd.attribute,
                               value=human_phrase(cmd.value))
    if isinstance(cmd, Remove):
        return template.format(name=cmd.object_id)
    if isinstance(cmd, Add):
        s = cmd.spec
        return template.format(name=s.name, size=s.size,
                               color=human_phrase(s.color), material=s.material,
                               shape=s.shape, place=_zone(s.bbox))
    if isinstance(cmd, Replace):
        r = cmd.replacement
        bits = [human_phrase(r.color) if r.color else "",
                r.shape if r.shape else "", r.name]
        new = " ".join(b for b in bits if b)
        return template.format(old=cmd.object_id, new=new)
    return rng.choice(TEMPLATES["variants"]["undo"])


def paraphrase(commands: list[EditCommand], mode: str, rng: DetRng,
               llm_client=None) -> ParaphraseRecord:
    """Render commands as one natural-language instruction.

    The DSL text always rides along as exact ground truth; ambiguity lives
    only in the surface phrasing.
    """
    if not commands:
        raise ValueError("paraphrase needs at least one command")
    dsl_text = format_program(commands)
    if mode == "llm":
        if llm_client is None:
            from .errors import LlmUnavailable
            raise LlmUnavailable("no paraphrase endpoint configured")
        text = llm_client.complete(
            f"Paraphrase this edit program as one casual user request: {dsl_text}",
            "")
        return ParaphraseRecord(text=text.strip(), dsl=dsl_text)
    pieces = [_fill_template(cmd, rng) for cmd in commands]
    text = pieces[0]
    for piece in pieces[1:]:
        text = text + rng.choice(TEMPLATES["connectives"]) + piece
    return ParaphraseRecord(text=text, dsl=dsl_text)


# --- whole sessions ---------------------------------------------------------------

def build_session(spec: SessionSpec) -> Session:
    """Generate a full session: states, commands, programs, prose, images."""
    s0 = synth_initial_state(spec.seed, spec)
    states = [s0]
    stack = [s0]
    commands_per_turn: list[list[EditCommand]] = []
    dsl_texts: list[str] = []
    instructions: list[str] = []
    para_rng = DetRng(spec.seed).fork("paraphrase")
    for t in range(1, spec.n_turns + 1):
        cmds = sample_commands(stack[-1], t, spec.seed, spec,
                               allow_undo=len(stack) >= 2)
        if cmds == [Undo()]:
            stack.pop()
            next_state = dc_replace(stack[-1], turn_index=t)
        else:
            next_state = apply_transition(stack[-1], cmds)
            stack.append(next_state)
        states.append(next_state)
        commands_per_turn.append(cmds)
        record = paraphrase(cmds, "template", para_rng.fork("turn", t))
        dsl_texts.append(record.dsl)
        instructions.append(record.text)
    images = [encode_png(render(s, spec.canvas[0], spec.canvas[1])) for s in states]
    return Session(spec=spec, states=states, commands=commands_per_turn,
                   dsl=dsl_texts, instructions=instructions, images=images,
                   image_uris=[content_uri(b) for b in images])


def replay_session_dsl(s0: SceneState, dsl_texts: list[str]) -> list[SceneState]:
    """Independent replay of the per-turn programs (the chain-validity oracle)."""
    states = [s0]
    stack = [s0]
    for t, text in enumerate(dsl_texts, start=1):
        cmds = parse_canonical(text)
        if cmds == [Undo()]:
            stack.pop()
            state = dc_replace(stack[-1], turn_index=t)
        else:
            state = apply_transition(stack[-1], cmds)
            stack.append(state)
        states.append(state)
    return states


# --- session directories ------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_session(session: Session, out_dir: str) -> None:
    """Write the normative layout: manifest.json, states/, dsl/, instructions/,
    images/. The manifest carries the seed, the spec echo, and content hashes;
    created_at is its only wall-clock field."""
    os.makedirs(out_dir, exist_ok=True)
    for sub in ("states", "dsl", "instructions", "images"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    hashes = {}
    for t, state in enumerate(session.states):
        rel = f"states/s{t}.json"
        data = dumps_state(state).encode()
        with open(os.path.join(out_dir, rel), "wb") as f:
            f.write(data)
        hashes[rel] = _sha256(data)
    for t in range(1, session.n_turns + 1):
        for rel, text in ((f"dsl/t{t}.txt", session.dsl[t - 1]),
                          (f"instructions/t{t}.txt", session.instructions[t - 1])):
            data = (text + "\n").encode()
            with open(os.path.join(out_dir, rel), "wb") as f:
                f.write(data)
            hashes[rel] = _sha256(data)
    for t, png in enumerate(session.images):
        rel = f"images/s{t}.png"
        with open(os.path.join(out_dir, rel), "wb") as f:
            f.write(png)
        hashes[rel] = _sha256(png)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": session.spec.seed,
        "spec": session.spec.to_json(),
        "n_turns": session.n_turns,
        "image_uris": session.image_uris,
        "hashes": hashes,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def load_session(session_dir: str) -> Session:
    """Load a session directory, verifying the layout and content hashes."""
    manifest_path = os.path.join(session_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise LayoutError(f"no manifest.json under {session_dir}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    spec = SessionSpec.from_json(manifest["spec"])
    n_turns = manifest["n_turns"]
    try:
        states = []
        for t in range(n_turns + 1):
            with open(os.path.join(session_dir, f"states/s{t}.json"), encoding="utf-8") as f:
                states.append(loads_state(f.read()))
        dsl_texts, instructions = [], []
        for t in range(1, n_turns + 1):
            with open(os.path.join(session_dir, f"dsl/t{t}.txt"), encoding="utf-8") as f:
                dsl_texts.append(f.read().rstrip("\n"))
            with open(os.path.join(session_dir, f"instructions/t{t}.txt"), encoding="utf-8") as f:
                instructions.append(f.read().rstrip("\n"))
        images = []
        for t in range(n_turns + 1):
            with open(os.path.join(session_dir, f"images/s{t}.png"), "rb") as f:
                images.append(f.read())
    except FileNotFoundError as exc:
        raise LayoutError(f"incomplete session directory: {exc}") from exc
    commands = [parse_canonical(text) for text in dsl_texts]
    return Session(spec=spec, states=states, commands=commands, dsl=dsl_texts,
                   instructions=instructions, images=images,
                   image_uris=[content_uri(b) for b in images])


def session_passes_filters(session: Session, min_objects: int = 0,
                           required_kinds: Optional[set[str]] = None) -> bool:
    """Curation predicates: object count and command-kind coverage."""
    if min(len(s.objects) for s in session.states) < min_objects:
        return False
    if required_kinds:
        seen = {command_kind(c) for cmds in session.commands for c in cmds}
        if not required_kinds <= seen:
            return False
    return True
