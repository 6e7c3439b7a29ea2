"""Shared builders for randomized scene/command tests (seeded, reproducible)."""

from fractions import Fraction

import pytest

from editloop.rng import DetRng
from editloop.scene import (
    Add,
    Adjust,
    ObjectSpec,
    Remove,
    Replace,
    Replacement,
    SceneState,
)
from editloop.vocab import COLORS, MATERIALS, SHAPES, SIZES

NOUNS = [
    "cooler", "crate", "lamp", "ball", "book", "mug", "plant", "radio",
    "clock", "vase", "bottle", "pillow", "frame", "kite", "drum", "fan",
]


def random_object(rng: DetRng, object_id: str, color: str, z: int,
                  q: int = 64) -> ObjectSpec:
    wn = rng.randint(q // 8, q // 3)
    hn = rng.randint(q // 8, q // 3)
    w, h = Fraction(wn, q), Fraction(hn, q)
    x = Fraction(rng.randint(0, q - wn), q)
    y = Fraction(rng.randint(0, q - hn), q)
    return ObjectSpec(
        object_id=object_id,
        name=object_id,
        color=color,
        size=rng.choice(SIZES),
        material=rng.choice(MATERIALS),
        shape=rng.choice(SHAPES),
        bbox=(x, y, w, h),
        z_order=z,
    )


def random_state(rng: DetRng, n_objects: int = None, canvas=(96, 96)) -> SceneState:
    if n_objects is None:
        n_objects = rng.randint(1, 5)
    colors = rng.sample(COLORS, n_objects + 1)
    names = rng.sample(NOUNS, n_objects)
    objects = [random_object(rng, names[i], colors[i + 1], z=i + 1)
               for i in range(n_objects)]
    return SceneState(objects=tuple(objects), canvas_w=canvas[0],
                      canvas_h=canvas[1], background=colors[0])


def random_commands(rng: DetRng, state: SceneState, n: int = None):
    """Valid non-undo commands with distinct targets."""
    if n is None:
        n = rng.randint(1, min(2, len(state.objects)) if state.objects else 1)
    used = set()
    unused_names = [m for m in NOUNS if not state.has(m)]
    commands = []
    for _ in range(n):
        candidates = [o for o in state.objects if o.object_id not in used]
        kind = rng.choice(["add", "remove", "replace", "adjust", "adjust"])
        if not candidates and kind != "add":
            kind = "add"
        if kind == "add" and unused_names:
            name = unused_names.pop(0)
            color = rng.choice(COLORS)
            spec = random_object(rng, name, color, z=0)
            used.add(name)
            commands.append(Add(spec))
        elif kind == "remove" and len(candidates) > 1:
            target = rng.choice(candidates)
            used.add(target.object_id)
            commands.append(Remove(target.object_id))
        elif kind == "replace" and candidates and unused_names:
            target = rng.choice(candidates)
            name = unused_names.pop(0)
            used.add(target.object_id)
            used.add(name)
            commands.append(Replace(target.object_id, Replacement(
                name=name,
                color=rng.choice(COLORS),
                size=rng.choice(SIZES),
                material=rng.choice(MATERIALS),
                shape=rng.choice(SHAPES),
            )))
        elif candidates:
            target = rng.choice(candidates)
            attr = rng.choice(["color", "size", "material", "shape"])
            vocab = {"color": COLORS, "size": SIZES,
                     "material": MATERIALS, "shape": SHAPES}[attr]
            value = rng.choice([v for v in vocab if v != target.attribute(attr)])
            used.add(target.object_id)
            commands.append(Adjust(target.object_id, attr, value))
    return commands


@pytest.fixture
def rng():
    return DetRng(0x5EED)
