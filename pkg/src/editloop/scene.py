"""Symbolic scene states, canonical edit commands, and the transition operator.

States are immutable values; the transition operator is a pure function that
touches exactly the targeted objects and nothing else. Geometry is exact:
bounding boxes are rational fractions of the canvas, so no float ever enters
a pixel decision downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Union

from .errors import (
    ConflictingCommands,
    UndoInTransition,
    UnknownObject,
    VocabularyViolation,
)
from .vocab import ADJUSTABLE_ATTRIBUTES, COLORS, MATERIALS, SHAPES, SIZES, vocabulary

SCHEMA_VERSION = 1

BBox = tuple[Fraction, Fraction, Fraction, Fraction]


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        # Exact decimal reading: 0.7 means 7/10, not the nearest binary float.
        return Fraction(repr(v))
    raise TypeError(f"cannot interpret {v!r} as a fraction")


def make_bbox(x, y, w, h) -> BBox:
    return (_as_fraction(x), _as_fraction(y), _as_fraction(w), _as_fraction(h))


@dataclass(frozen=True)
class ObjectSpec:
    object_id: str
    name: str
    color: str
    size: str
    material: str
    shape: str
    bbox: BBox
    z_order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bbox", make_bbox(*self.bbox))
        if self.color not in COLORS:
            raise VocabularyViolation("color", self.color)
        if self.size not in SIZES:
            raise VocabularyViolation("size", self.size)
        if self.material not in MATERIALS:
            raise VocabularyViolation("material", self.material)
        if self.shape not in SHAPES:
            raise VocabularyViolation("shape", self.shape)
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError(f"bbox of {self.object_id!r} must have positive extent")
        if x < 0 or y < 0 or x + w > 1 or y + h > 1:
            raise ValueError(f"bbox of {self.object_id!r} must lie within the unit canvas")

    def attribute(self, name: str) -> str:
        if name not in ADJUSTABLE_ATTRIBUTES:
            raise KeyError(name)
        return getattr(self, name)

    def with_attribute(self, name: str, value: str) -> "ObjectSpec":
        if name not in ADJUSTABLE_ATTRIBUTES:
            raise VocabularyViolation(name, value)
        return replace(self, **{name: value})


@dataclass(frozen=True)
class SceneState:
    objects: tuple[ObjectSpec, ...]
    canvas_w: int
    canvas_h: int
    background: str
    turn_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.background not in COLORS:
            raise VocabularyViolation("color", self.background)
        if self.canvas_w < 16 or self.canvas_h < 16:
            raise ValueError("canvas must be at least 16x16")
        if self.turn_index < 0:
            raise ValueError("turn_index must be >= 0")
        seen = set()
        for obj in self.objects:
            if obj.object_id in seen:
                raise ValueError(f"duplicate object id {obj.object_id!r}")
            seen.add(obj.object_id)

    def ids(self) -> list[str]:
        return [o.object_id for o in self.objects]

    def get(self, object_id: str) -> ObjectSpec:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise UnknownObject(object_id)

    def has(self, object_id: str) -> bool:
        return any(o.object_id == object_id for o in self.objects)

    def max_z(self) -> int:
        return max((o.z_order for o in self.objects), default=0)


# --- canonical edit commands ---------------------------------------------

@dataclass(frozen=True)
class Replacement:
    """New content for a Replace; None fields inherit from the target.

    bbox=None keeps the target's placement (the default); object_id defaults
    to the new name.
    """
    name: str
    color: Optional[str] = None
    size: Optional[str] = None
    material: Optional[str] = None
    shape: Optional[str] = None
    bbox: Optional[BBox] = None
    object_id: Optional[str] = None

    def resolve(self, old: ObjectSpec) -> ObjectSpec:
        return ObjectSpec(
            object_id=self.object_id or self.name,
            name=self.name,
            color=self.color or old.color,
            size=self.size or old.size,
            material=self.material or old.material,
            shape=self.shape or old.shape,
            bbox=self.bbox or old.bbox,
            z_order=old.z_order,
        )


@dataclass(frozen=True)
class Add:
    spec: ObjectSpec


@dataclass(frozen=True)
class Remove:
    object_id: str


@dataclass(frozen=True)
class Replace:
    object_id: str
    replacement: Replacement


@dataclass(frozen=True)
class Adjust:
    object_id: str
    attribute: str
    value: str

    def __post_init__(self):
        if self.attribute not in ADJUSTABLE_ATTRIBUTES:
            raise VocabularyViolation(self.attribute, self.value)


@dataclass(frozen=True)
class Undo:
    pass


EditCommand = Union[Add, Remove, Replace, Adjust, Undo]


def command_kind(command: EditCommand) -> str:
    return {Add: "add", Remove: "remove", Replace: "replace",
            Adjust: "adjust", Undo: "undo"}[type(command)]


def command_target(command: EditCommand) -> Optional[str]:
    """The object id a command claims, or None for undo."""
    if isinstance(command, Add):
        return command.spec.object_id
    if isinstance(command, (Remove, Replace, Adjust)):
        return command.object_id
    return None


# --- transition operator --------------------------------------------------

def apply_transition(state: SceneState, commands: list[EditCommand]) -> SceneState:
    """Apply a command set to a state, touching only the targeted objects.

    Undo never reaches this function (it resolves against the history graph);
    passing one raises UndoInTransition. The input state is never modified.
    """
    targets = set()
    for cmd in commands:
        if isinstance(cmd, Undo):
            raise UndoInTransition()
        target = command_target(cmd)
        if target in targets:
            raise ConflictingCommands(target)
        targets.add(target)
        if isinstance(cmd, (Remove, Replace, Adjust)) and not state.has(cmd.object_id):
            raise UnknownObject(cmd.object_id)
        if isinstance(cmd, Adjust):
            if cmd.value not in vocabulary(cmd.attribute):
                raise VocabularyViolation(cmd.attribute, cmd.value)
        if isinstance(cmd, Add) and state.has(cmd.spec.object_id):
            raise ConflictingCommands(cmd.spec.object_id)

    objects = list(state.objects)
    for cmd in commands:
        if isinstance(cmd, Adjust):
            idx = next(i for i, o in enumerate(objects) if o.object_id == cmd.object_id)
            objects[idx] = objects[idx].with_attribute(cmd.attribute, cmd.value)
        elif isinstance(cmd, Remove):
            objects = [o for o in objects if o.object_id != cmd.object_id]
        elif isinstance(cmd, Replace):
            idx = next(i for i, o in enumerate(objects) if o.object_id == cmd.object_id)
            objects[idx] = cmd.replacement.resolve(objects[idx])
        elif isinstance(cmd, Add):
            spec = cmd.spec
            if spec.z_order == 0:
                # Unplaced additions land on top of everything drawn so far.
                top = max((o.z_order for o in objects), default=0) + 1
                spec = replace(spec, z_order=top)
            objects.append(spec)
    return SceneState(
        objects=tuple(objects),
        canvas_w=state.canvas_w,
        canvas_h=state.canvas_h,
        background=state.background,
        turn_index=state.turn_index + 1,
    )


# --- state diffing ----------------------------------------------------------

@dataclass(frozen=True)
class SceneDiff:
    changed: tuple[tuple[str, str, object, object], ...]  # (id, field, old, new)
    added_ids: frozenset[str]
    removed_ids: frozenset[str]

    def is_empty(self) -> bool:
        return not self.changed and not self.added_ids and not self.removed_ids

    def ids_touched(self) -> set[str]:
        return {c[0] for c in self.changed} | set(self.added_ids) | set(self.removed_ids)


_DIFF_FIELDS = ("name", "color", "size", "material", "shape", "bbox", "z_order")


def diff_states(a: SceneState, b: SceneState) -> SceneDiff:
    """Field-level diff from a to b; applying it to a reproduces b's objects."""
    a_by_id = {o.object_id: o for o in a.objects}
    b_by_id = {o.object_id: o for o in b.objects}
    changed = []
    for oid in a.ids():
        if oid not in b_by_id:
            continue
        oa, ob = a_by_id[oid], b_by_id[oid]
        for f in _DIFF_FIELDS:
            if getattr(oa, f) != getattr(ob, f):
                changed.append((oid, f, getattr(oa, f), getattr(ob, f)))
    added = frozenset(set(b_by_id) - set(a_by_id))
    removed = frozenset(set(a_by_id) - set(b_by_id))
    return SceneDiff(changed=tuple(changed), added_ids=added, removed_ids=removed)


def diff_as_commands(diff: SceneDiff, target: SceneState) -> list[EditCommand]:
    """Express a diff as canonical commands (used by the round-trip oracle)."""
    commands: list[EditCommand] = []
    adjusted: dict[str, list[EditCommand]] = {}
    needs_replace: set[str] = set()
    for oid, fieldname, _old, new in diff.changed:
        if fieldname in ADJUSTABLE_ATTRIBUTES:
            adjusted.setdefault(oid, []).append(Adjust(oid, fieldname, new))
        else:
            needs_replace.add(oid)
    for oid in sorted(diff.removed_ids):
        commands.append(Remove(oid))
    for oid in sorted(needs_replace):
        spec = target.get(oid)
        commands.append(Replace(oid, Replacement(
            name=spec.name, color=spec.color, size=spec.size,
            material=spec.material, shape=spec.shape, bbox=spec.bbox,
            object_id=spec.object_id)))
        adjusted.pop(oid, None)
    for cmds in adjusted.values():
        commands.extend(cmds)
    for oid in sorted(diff.added_ids):
        commands.append(Add(target.get(oid)))
    return commands


# --- canonical JSON -----------------------------------------------------------

def _bbox_to_json(bbox: BBox) -> list[str]:
    return [f"{c.numerator}/{c.denominator}" for c in bbox]


def _bbox_from_json(parts: list[str]) -> BBox:
    return make_bbox(*[Fraction(p) for p in parts])


def object_to_json(obj: ObjectSpec) -> dict:
    return {
        "object_id": obj.object_id,
        "name": obj.name,
        "color": obj.color,
        "size": obj.size,
        "material": obj.material,
        "shape": obj.shape,
        "bbox": _bbox_to_json(obj.bbox),
        "z_order": obj.z_order,
    }


def object_from_json(doc: dict) -> ObjectSpec:
    return ObjectSpec(
        object_id=doc["object_id"],
        name=doc["name"],
        color=doc["color"],
        size=doc["size"],
        material=doc["material"],
        shape=doc["shape"],
        bbox=_bbox_from_json(doc["bbox"]),
        z_order=doc["z_order"],
    )


def state_to_json(state: SceneState) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "canvas_w": state.canvas_w,
        "canvas_h": state.canvas_h,
        "background": state.background,
        "turn_index": state.turn_index,
        "objects": [object_to_json(o) for o in state.objects],
    }


def state_from_json(doc: dict) -> SceneState:
    return SceneState(
        objects=tuple(object_from_json(o) for o in doc["objects"]),
        canvas_w=doc["canvas_w"],
        canvas_h=doc["canvas_h"],
        background=doc["background"],
        turn_index=doc["turn_index"],
    )


def dumps_state(state: SceneState) -> str:
    """Canonical serialized form: stable key order, newline-terminated."""
    return json.dumps(state_to_json(state), sort_keys=True, separators=(",", ":")) + "\n"


def loads_state(text: str) -> SceneState:
    return state_from_json(json.loads(text))


def command_to_json(command: EditCommand) -> dict:
    kind = command_kind(command)
    if isinstance(command, Add):
        return {"kind": kind, "spec": object_to_json(command.spec)}
    if isinstance(command, Remove):
        return {"kind": kind, "object_id": command.object_id}
    if isinstance(command, Replace):
        r = command.replacement
        doc = {"kind": kind, "object_id": command.object_id, "name": r.name}
        for f in ("color", "size", "material", "shape"):
            if getattr(r, f) is not None:
                doc[f] = getattr(r, f)
        if r.bbox is not None:
            doc["bbox"] = _bbox_to_json(r.bbox)
        if r.object_id is not None:
            doc["new_object_id"] = r.object_id
        return doc
    if isinstance(command, Adjust):
        return {"kind": kind, "object_id": command.object_id,
                "attribute": command.attribute, "value": command.value}
    return {"kind": "undo"}


def command_from_json(doc: dict) -> EditCommand:
    kind = doc["kind"]
    if kind == "add":
        return Add(object_from_json(doc["spec"]))
    if kind == "remove":
        return Remove(doc["object_id"])
    if kind == "replace":
        return Replace(doc["object_id"], Replacement(
            name=doc["name"],
            color=doc.get("color"),
            size=doc.get("size"),
            material=doc.get("material"),
            shape=doc.get("shape"),
            bbox=_bbox_from_json(doc["bbox"]) if "bbox" in doc else None,
            object_id=doc.get("new_object_id"),
        ))
    if kind == "adjust":
        return Adjust(doc["object_id"], doc["attribute"], doc["value"])
    if kind == "undo":
        return Undo()
    raise ValueError(f"unknown command kind {kind!r}")
