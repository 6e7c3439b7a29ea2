"""Rasterizer: determinism, exact coverage, patterns, masks, occlusion."""

import hashlib
import math
from fractions import Fraction

import numpy as np
import pytest

from editloop.errors import DimensionTooSmall, UnknownObject
from editloop.raster import (
    SIZE_SCALE,
    coverage_mask,
    object_mask,
    painted_at,
    painted_mask,
    render,
    render_window,
)
from editloop.rng import DetRng
from editloop.scene import ObjectSpec, Remove, SceneState, apply_transition
from editloop.vocab import PALETTE

from conftest import random_state


def obj(oid, color="red", size="large", material="matte", shape="rectangle",
        bbox=(Fraction(1, 4), Fraction(1, 4), Fraction(1, 2), Fraction(1, 2)), z=1):
    return ObjectSpec(object_id=oid, name=oid, color=color, size=size,
                      material=material, shape=shape, bbox=bbox, z_order=z)


def scene(*objects, background="white", w=64, h=64):
    return SceneState(objects=tuple(objects), canvas_w=w, canvas_h=h,
                      background=background)


def test_empty_scene_is_uniform_background():
    img = render(scene(background="teal"), 64, 64)
    assert img.shape == (64, 64, 3)
    assert (img == np.array(PALETTE["teal"], dtype=np.uint8)).all()


def test_render_determinism_by_hash():
    rng = DetRng(11)
    s = random_state(rng, n_objects=4)
    a = render(s, 128, 96)
    b = render(s, 128, 96)
    assert hashlib.sha256(a.tobytes()).digest() == hashlib.sha256(b.tobytes()).digest()


def test_glossy_circle_pattern_values():
    # Hand-evaluated from docs/patterns.md: fnv1a64("ball") % 11 == 8, so at
    # (64,64) the band (2x+y+8) % 16 = 8 < 13 -> painted red; at (64,53) the
    # band is 13 -> a pattern hole showing the white background. Both pixel
    # centers lie inside the circle bbox (0.25,0.25,0.5,0.5) at 128x128.
    s = scene(obj("ball", color="red", material="glossy", shape="circle"),
              w=128, h=128)
    img = render(s, 128, 128)
    assert tuple(img[64, 64]) == (210, 40, 40)
    assert tuple(img[53, 64]) == (210, 210, 210)
    assert painted_at(s.get("ball"), 64, 64)
    assert not painted_at(s.get("ball"), 64, 53)


def test_striped_pattern_values():
    # fnv1a64("crate") % 7 == 1 -> at (0,0): ((0+0+1)//6) % 2 == 0 -> painted;
    # at (10,20): ((10+20+1)//6) % 2 == 1 -> a hole showing the background.
    s = scene(obj("crate", color="red", material="striped",
                  bbox=(Fraction(0), Fraction(0), Fraction(1), Fraction(1))),
              w=64, h=64)
    img = render(s, 64, 64)
    assert tuple(img[0, 0]) == (210, 40, 40)
    assert tuple(img[20, 10]) == (210, 210, 210)


# --- exact coverage oracle ---------------------------------------------------

def brute_force_coverage(o: ObjectSpec, width: int, height: int) -> np.ndarray:
    """Direct pixel-center evaluation of the published coverage rules."""
    x, y, w, h = o.bbox
    s = SIZE_SCALE[o.size]
    cx, cy = x + w / 2, y + h / 2
    we, he = w * s, h * s
    x0, y0 = (cx - we / 2) * width, (cy - he / 2) * height
    x1, y1 = (cx + we / 2) * width, (cy + he / 2) * height
    mask = np.zeros((height, width), dtype=bool)
    for j in range(height):
        py = Fraction(2 * j + 1, 2)
        for i in range(width):
            px = Fraction(2 * i + 1, 2)
            if o.shape == "rectangle":
                inside = x0 <= px < x1 and y0 <= py < y1
            elif o.shape == "circle":
                ccx, ccy = cx * width, cy * height
                rx, ry = we * width / 2, he * height / 2
                dx, dy = px - ccx, py - ccy
                inside = (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1
            else:  # triangle: half-open rows, closed column span
                if not (y0 <= py < y1):
                    inside = False
                else:
                    t = (py - y0) / (y1 - y0)
                    apex = (x0 + x1) / 2
                    left = apex + (x0 - apex) * t
                    right = apex + (x1 - apex) * t
                    inside = left <= px <= right
            mask[j, i] = inside
    return mask


@pytest.mark.parametrize("shape", ["rectangle", "circle", "triangle"])
@pytest.mark.parametrize("size", ["small", "medium", "large"])
def test_coverage_matches_brute_force(shape, size):
    rng = DetRng(2024)
    for trial in range(6):
        q = 32
        wn = rng.randint(6, 16)
        hn = rng.randint(6, 16)
        xn = rng.randint(0, q - wn)
        yn = rng.randint(0, q - hn)
        o = obj("t", shape=shape, size=size,
                bbox=(Fraction(xn, q), Fraction(yn, q), Fraction(wn, q), Fraction(hn, q)))
        width, height = 40, 36
        fast = coverage_mask(o, width, height)
        slow = brute_force_coverage(o, width, height)
        assert (fast == slow).all(), f"{shape}/{size} trial {trial}"


def test_add_bbox_rasterization_rule():
    # bbox (0.25,0.25,0.5,0.5) on 200x200 covers exactly [50,150) x [50,150).
    o = obj("r", shape="rectangle", size="large",
            bbox=(Fraction(1, 4), Fraction(1, 4), Fraction(1, 2), Fraction(1, 2)))
    m = coverage_mask(o, 200, 200)
    expected = np.zeros((200, 200), dtype=bool)
    expected[50:150, 50:150] = True
    assert (m == expected).all()


# --- object masks ------------------------------------------------------------

def test_full_canvas_rectangle_mask_all_ones():
    s = scene(obj("big", bbox=(Fraction(0), Fraction(0), Fraction(1), Fraction(1))))
    assert object_mask(s, "big", 64, 64).all()


def test_fully_occluded_mask_all_zeros():
    below = obj("below", bbox=(Fraction(3, 8), Fraction(3, 8), Fraction(1, 4), Fraction(1, 4)), z=1)
    above = obj("above", color="blue",
                bbox=(Fraction(1, 4), Fraction(1, 4), Fraction(1, 2), Fraction(1, 2)), z=2)
    s = scene(below, above)
    assert not object_mask(s, "below", 64, 64).any()
    assert object_mask(s, "above", 64, 64).any()


def test_mask_unknown_object():
    with pytest.raises(UnknownObject):
        object_mask(scene(obj("a")), "ghost", 64, 64)


def test_mask_equals_render_pixel_diff():
    # p in mask(s, x)  <=>  render(s)(p) != render(s - x)(p), for scenes with
    # all-distinct colors (no coincident same-color overlaps).
    rng = DetRng(77)
    for _ in range(10):
        s = random_state(rng, n_objects=3, canvas=(80, 72))
        full = render(s, 80, 72)
        for oid in s.ids():
            without = apply_transition(s, [Remove(oid)])
            partial = render(without, 80, 72)
            diff = (full != partial).any(axis=2)
            mask = object_mask(s, oid, 80, 72)
            assert (mask == diff).all(), oid


def test_render_window_matches_full_render_crop():
    rng = DetRng(13)
    for _ in range(8):
        s = random_state(rng, n_objects=3, canvas=(100, 90))
        full = render(s, 100, 90)
        x0 = rng.randint(0, 40)
        y0 = rng.randint(0, 40)
        x1 = rng.randint(x0 + 10, 100)
        y1 = rng.randint(y0 + 10, 90)
        win = render_window(s, 100, 90, (x0, y0, x1, y1))
        assert (win == full[y0:y1, x0:x1]).all()


def test_dimension_too_small():
    with pytest.raises(DimensionTooSmall):
        render(scene(), 8, 64)


def test_masks_partition_against_draw_order():
    # Every pixel is colored by background or exactly one object's mask.
    rng = DetRng(5)
    s = random_state(rng, n_objects=4, canvas=(64, 64))
    masks = [object_mask(s, oid, 64, 64) for oid in s.ids()]
    stack = np.stack(masks)
    assert (stack.sum(axis=0) <= 1).all()
