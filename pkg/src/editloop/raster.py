"""Deterministic integer rasterizer for symbolic scenes.

Same state and dimensions produce bit-identical pixels on every platform:
shape coverage is decided by exact rational pixel-center tests (Fraction
arithmetic plus integer square roots), and material patterns are integer
functions of the absolute pixel coordinate and an FNV-1a hash of the object
id. No anti-aliasing, no floats. The pattern formulas are published in
docs/patterns.md; tests evaluate them by hand.

Conventions
-----------
* Pixel (x, y) covers the unit square [x, x+1) x [y, y+1); its center is
  (x + 1/2, y + 1/2). A pixel belongs to a region iff its center does.
* Rectangles use half-open intervals; ellipses are closed (<=); triangles
  use half-open rows and closed column spans (keeps them symmetric).
* Sizes scale the shape inside its bbox around the bbox center:
  small = 1/2, medium = 3/4, large = 1.
* Draw order: ascending z_order, ties broken by object list position;
  later-drawn objects occlude earlier ones.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import DimensionTooSmall, UnknownObject
from .rng import fnv1a64
from .scene import ObjectSpec, SceneState
from .vocab import PALETTE

SIZE_SCALE = {"small": Fraction(1, 2), "medium": Fraction(3, 4), "large": Fraction(1)}

HALF = Fraction(1, 2)


def _pixel_range(lo: Fraction, hi: Fraction, n: int) -> tuple[int, int]:
    """Indices i with center i+1/2 in [lo, hi), clamped to [0, n)."""
    i0 = math.ceil(lo - HALF)
    i1 = math.ceil(hi - HALF)
    return max(i0, 0), min(i1, n)


def _scaled_box(obj: ObjectSpec) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Effective shape box in unit coordinates after size scaling."""
    x, y, w, h = obj.bbox
    s = SIZE_SCALE[obj.size]
    cx, cy = x + w / 2, y + h / 2
    we, he = w * s, h * s
    return cx - we / 2, cy - he / 2, we, he


def _ellipse_row_span(cx: Fraction, cy: Fraction, rx: Fraction, ry: Fraction,
                      j: int, width: int) -> tuple[int, int]:
    """Column range of row j inside the ellipse, exact (empty as (0, 0))."""
    py = Fraction(2 * j + 1, 2)
    dy = py - cy
    rem = 1 - (dy * dy) / (ry * ry)
    if rem < 0:
        return 0, 0
    # dx^2 <= rx^2 * rem  with dx = i + 1/2 - cx; clear denominators so the
    # bound is an integer square-root problem.
    r2 = rx * rx * rem
    cn, cd = cx.numerator, cx.denominator
    m = r2 * 4 * cd * cd
    bound = math.isqrt(m.numerator // m.denominator)
    lo = math.ceil(Fraction(2 * cn - bound, cd))          # 2i+1 >= lo
    hi = math.floor(Fraction(2 * cn + bound, cd))         # 2i+1 <= hi
    i0 = math.ceil(Fraction(lo - 1, 2))
    i1 = math.floor(Fraction(hi - 1, 2)) + 1
    return max(i0, 0), min(i1, width)


def _triangle_row_span(x0: Fraction, y0: Fraction, w: Fraction, h: Fraction,
                       j: int, width: int) -> tuple[int, int]:
    """Column range of row j inside the apex-up isoceles triangle."""
    py = Fraction(2 * j + 1, 2)
    t = (py - y0) / h
    if t < 0 or t >= 1:
        return 0, 0
    cx = x0 + w / 2
    left = cx + (x0 - cx) * t
    right = cx + (x0 + w - cx) * t
    i0 = math.ceil(left - HALF)
    i1 = math.floor(right - HALF) + 1
    return max(i0, 0), min(i1, width)


def coverage_rows(obj: ObjectSpec, width: int, height: int):
    """Yield (row, col_start, col_end) half-open spans covered by the object."""
    bx, by, bw, bh = _scaled_box(obj)
    x_lo, x_hi = _pixel_range(bx * width, (bx + bw) * width, width)
    y_lo, y_hi = _pixel_range(by * height, (by + bh) * height, height)
    if obj.shape == "rectangle":
        for j in range(y_lo, y_hi):
            if x_lo < x_hi:
                yield j, x_lo, x_hi
        return
    if obj.shape == "circle":
        cx, cy = (bx + bw / 2) * width, (by + bh / 2) * height
        rx, ry = bw * width / 2, bh * height / 2
        # Closed region: a row tangent at exactly |dy| == ry is included,
        # so the row window is closed, unlike the half-open rectangle.
        y_lo = max(math.ceil(by * height - HALF), 0)
        y_hi = min(math.floor((by + bh) * height - HALF) + 1, height)
        for j in range(y_lo, y_hi):
            a, b = _ellipse_row_span(cx, cy, rx, ry, j, width)
            if a < b:
                yield j, a, b
        return
    # triangle
    for j in range(y_lo, y_hi):
        a, b = _triangle_row_span(bx * width, by * height, bw * width, bh * height,
                                  j, width)
        if a < b:
            yield j, a, b


def coverage_mask(obj: ObjectSpec, width: int, height: int) -> np.ndarray:
    """Boolean (height, width) shape footprint of the object (pattern ignored)."""
    mask = np.zeros((height, width), dtype=bool)
    for j, a, b in coverage_rows(obj, width, height):
        mask[j, a:b] = True
    return mask


def painted_mask(obj: ObjectSpec, width: int, height: int) -> np.ndarray:
    """Pixels the object actually paints: footprint minus pattern holes."""
    block = _painted_window(obj, width, height, 0, 0, width, height)
    mask = np.zeros((height, width), dtype=bool)
    if block is not None:
        x_min, y_min, painted = block
        mask[y_min:y_min + painted.shape[0], x_min:x_min + painted.shape[1]] = painted
    return mask


# --- material patterns ------------------------------------------------------

def pattern_paint_mask(material: str, object_id: str,
                       xs: np.ndarray, ys: np.ndarray) -> np.ndarray | None:
    """Boolean grid: which covered pixels the material actually paints.

    Patterns are texture as geometry: unpainted pixels are holes showing
    whatever lies beneath, so every painted pixel keeps the object's exact
    palette color. None means matte (everything painted). The integer
    formulas, keyed on absolute coordinates and an FNV-1a hash of the object
    id, are published in docs/patterns.md.
    """
    if material == "matte":
        return None
    h = fnv1a64(object_id)
    X = xs[np.newaxis, :].astype(np.int64)
    Y = ys[:, np.newaxis].astype(np.int64)
    if material == "striped":
        return (((X + Y + h % 7) // 6) % 2) == 0
    if material == "dotted":
        return (((X + h % 5) % 9) < 5) & (((Y + (h >> 3) % 5) % 9) < 5)
    if material == "glossy":
        return ((2 * X + Y + h % 11) % 16) < 13
    raise ValueError(f"unknown material {material!r}")


def painted_at(obj: ObjectSpec, x: int, y: int) -> bool:
    """Would the material paint absolute pixel (x, y), geometry aside?"""
    mask = pattern_paint_mask(obj.material, obj.object_id,
                              np.array([x]), np.array([y]))
    return True if mask is None else bool(mask[0, 0])


# --- rendering ---------------------------------------------------------------

def draw_order(state: SceneState) -> list[ObjectSpec]:
    return [o for _, o in sorted(enumerate(state.objects),
                                 key=lambda p: (p[1].z_order, p[0]))]


def _painted_window(obj: ObjectSpec, width: int, height: int,
                    x_off: int, y_off: int, win_w: int, win_h: int):
    """(x_min, y_min, painted) for the object clipped to a window, or None.

    painted is shape coverage intersected with the material's paint mask,
    in window-local coordinates offset by (x_min, y_min).
    """
    spans = []
    for j, a, b in coverage_rows(obj, width, height):
        jj = j - y_off
        if jj < 0 or jj >= win_h:
            continue
        a, b = max(a - x_off, 0), min(b - x_off, win_w)
        if a < b:
            spans.append((jj, a, b))
    if not spans:
        return None
    y_min = min(s[0] for s in spans)
    y_max = max(s[0] for s in spans) + 1
    x_min = min(s[1] for s in spans)
    x_max = max(s[2] for s in spans)
    painted = np.zeros((y_max - y_min, x_max - x_min), dtype=bool)
    for jj, a, b in spans:
        painted[jj - y_min, a - x_min:b - x_min] = True
    xs = np.arange(x_min + x_off, x_max + x_off)
    ys = np.arange(y_min + y_off, y_max + y_off)
    holes = pattern_paint_mask(obj.material, obj.object_id, xs, ys)
    if holes is not None:
        painted &= holes
    return x_min, y_min, painted


def _paint(img: np.ndarray, obj: ObjectSpec, width: int, height: int,
           x_off: int = 0, y_off: int = 0) -> None:
    """Paint the object into img, which is the window starting at (x_off, y_off)."""
    win_h, win_w = img.shape[:2]
    block = _painted_window(obj, width, height, x_off, y_off, win_w, win_h)
    if block is None:
        return
    x_min, y_min, painted = block
    region = img[y_min:y_min + painted.shape[0], x_min:x_min + painted.shape[1]]
    region[painted] = np.array(PALETTE[obj.color], dtype=np.uint8)


def render(state: SceneState, width: int, height: int) -> np.ndarray:
    """Rasterize a scene to an RGB byte image of shape (height, width, 3)."""
    if width < 16 or height < 16:
        raise DimensionTooSmall(f"{width}x{height} is below the 16px minimum")
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = PALETTE[state.background]
    for obj in draw_order(state):
        _paint(img, obj, width, height)
    return img


def render_window(state: SceneState, width: int, height: int,
                  window: tuple[int, int, int, int]) -> np.ndarray:
    """Render only the half-open window (x0, y0, x1, y1) of the full canvas.

    Bit-identical to render(state, width, height)[y0:y1, x0:x1] because
    patterns key on absolute coordinates.
    """
    x0, y0, x1, y1 = window
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise ValueError(f"window {window} outside canvas {width}x{height}")
    img = np.empty((y1 - y0, x1 - x0, 3), dtype=np.uint8)
    img[:] = PALETTE[state.background]
    for obj in draw_order(state):
        _paint(img, obj, width, height, x_off=x0, y_off=y0)
    return img


def object_mask(state: SceneState, object_id: str, width: int, height: int) -> np.ndarray:
    """Exact visible paint of an object: painted pixels not painted over.

    A pixel is in the mask iff render() would color it with this object;
    pattern holes are not part of the object, and holes in occluders above
    do not occlude.
    """
    if width < 16 or height < 16:
        raise DimensionTooSmall(f"{width}x{height} is below the 16px minimum")
    target = state.get(object_id)  # raises UnknownObject
    mask = painted_mask(target, width, height)
    order = draw_order(state)
    idx = next(i for i, o in enumerate(order) if o.object_id == object_id)
    for above in order[idx + 1:]:
        if not mask.any():
            break
        mask &= ~painted_mask(above, width, height)
    return mask
