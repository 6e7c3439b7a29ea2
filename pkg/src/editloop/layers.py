"""Layer-scoped editing: localize a region, crop it losslessly, edit it
through a backend, and blend it back.

The working currency is the LayerPatch: a byte-exact crop of the source
image around the mask, with the mask in patch-local coordinates and a
context ring of `padding` pixels for the editor to look at. With
feather_sigma = 0 the blend writes only mask pixels, so everything outside
the localize mask is byte-identical to the input by construction — that is
the whole point of the mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Optional

import numpy as np

from .errors import EmptyMask, PatchOutOfBounds, UnknownParent
from .filters import gaussian_blur, round_half_away
from .history import ImageContext, StateGraph, record_image, rollback
from .images import decode_png, encode_png
from .raster import _pixel_range
from .scene import (
    Add,
    EditCommand,
    Replace,
    SceneState,
    Undo,
    apply_transition,
    command_kind,
)


def default_margin(width: int, height: int) -> int:
    """Mask dilation margin: 2% of the image diagonal."""
    return int(round(0.02 * math.hypot(width, height)))


def default_feather(patch_w: int, patch_h: int) -> float:
    """Feather sigma: max(2 px, 0.3% of the patch diagonal)."""
    return max(2.0, 0.003 * math.hypot(patch_w, patch_h))


DEFAULT_PADDING = 16


@dataclass(frozen=True)
class LayerPatch:
    pixels: np.ndarray          # (h, w, 3) uint8, byte-exact crop at creation
    origin: tuple[int, int]     # (x, y) offset of the patch in the parent image
    mask_local: np.ndarray      # (h, w) bool, the localize mask in patch coords
    padding: int

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def window(self) -> tuple[int, int, int, int]:
        x, y = self.origin
        return (x, y, x + self.width, y + self.height)


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight half-open (x0, y0, x1, y1) around the set pixels."""
    if not mask.any():
        raise EmptyMask("mask has no set pixels")
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1


def dilate_mask(mask: np.ndarray, margin: int) -> np.ndarray:
    """Dilation by a (2*margin+1) square structuring element."""
    if margin <= 0:
        return mask
    from scipy.ndimage import maximum_filter
    return maximum_filter(mask.astype(np.uint8), size=2 * margin + 1).astype(bool)


def _bbox_rect_mask(bbox, width: int, height: int) -> np.ndarray:
    x, y, w, h = bbox
    x0, x1 = _pixel_range(x * width, (x + w) * width, width)
    y0, y1 = _pixel_range(y * height, (y + h) * height, height)
    mask = np.zeros((height, width), dtype=bool)
    mask[y0:y1, x0:x1] = True
    return mask


def localize(image: np.ndarray, scene: SceneState, command: EditCommand,
             margin: Optional[int] = None) -> np.ndarray:
    """Mask of everything a command may change, dilated by the margin.

    The region is the target's placement box (any shape or size the edit
    produces stays inside it); for Add it is the commanded placement box;
    a Replace that overrides placement masks the union of old and new.
    """
    if isinstance(command, Undo):
        raise ValueError("undo has no localize mask")
    height, width = image.shape[:2]
    if margin is None:
        margin = default_margin(width, height)
    if isinstance(command, Add):
        mask = _bbox_rect_mask(command.spec.bbox, width, height)
    elif isinstance(command, Replace):
        target = scene.get(command.object_id)
        mask = _bbox_rect_mask(target.bbox, width, height)
        if command.replacement.bbox is not None:
            mask |= _bbox_rect_mask(command.replacement.bbox, width, height)
    else:  # Remove / Adjust
        target = scene.get(command.object_id)
        mask = _bbox_rect_mask(target.bbox, width, height)
    mask = dilate_mask(mask, margin)
    if not mask.any():
        raise EmptyMask(f"degenerate geometry for {command_kind(command)}")
    return mask


def crop_layer(image: np.ndarray, mask: np.ndarray, padding: int = DEFAULT_PADDING) -> LayerPatch:
    """Losslessly crop the mask's bbox plus a context ring, clamped to bounds."""
    if mask.shape != image.shape[:2]:
        raise ValueError("mask dimensions must match the image")
    x0, y0, x1, y1 = mask_bbox(mask)  # raises EmptyMask
    x0 = max(x0 - padding, 0)
    y0 = max(y0 - padding, 0)
    x1 = min(x1 + padding, image.shape[1])
    y1 = min(y1 + padding, image.shape[0])
    return LayerPatch(
        pixels=image[y0:y1, x0:x1].copy(),
        origin=(x0, y0),
        mask_local=mask[y0:y1, x0:x1].copy(),
        padding=padding,
    )


def blend(original: np.ndarray, edited_patch: LayerPatch, feather_sigma: float) -> np.ndarray:
    """Alpha-composite a patch back: out = a*patch + (1-a)*original.

    The alpha is the patch mask feathered by a Gaussian of the given sigma
    (binary when sigma = 0). Pixels with alpha exactly 0 — everything
    outside the patch rectangle, and outside the mask when sigma = 0 — are
    byte-identical to the original. Output resolution always equals input
    resolution. Compositing happens in the stored gamma-encoded space.
    """
    x0, y0, x1, y1 = edited_patch.window()
    if x0 < 0 or y0 < 0 or x1 > original.shape[1] or y1 > original.shape[0]:
        raise PatchOutOfBounds(f"patch {edited_patch.window()} exceeds image bounds")
    out = original.copy()
    region = out[y0:y1, x0:x1]
    mask = edited_patch.mask_local
    if feather_sigma == 0:
        region[mask] = edited_patch.pixels[mask]
        return out
    alpha = np.clip(gaussian_blur(mask.astype(np.float64), feather_sigma), 0.0, 1.0)
    mixed = alpha[..., None] * edited_patch.pixels.astype(np.float64) \
        + (1.0 - alpha[..., None]) * region.astype(np.float64)
    composited = round_half_away(mixed)
    exact = alpha == 0.0
    composited[exact] = region[exact]
    out[y0:y1, x0:x1] = composited
    return out


def restrict_scene(scene: SceneState, window: tuple[int, int, int, int],
                   width: int, height: int) -> SceneState:
    """Drop objects whose placement cannot intersect the patch window."""
    x0, y0, x1, y1 = window
    kept = []
    for obj in scene.objects:
        bx, by, bw, bh = obj.bbox
        ox0, ox1 = _pixel_range(bx * width, (bx + bw) * width, width)
        oy0, oy1 = _pixel_range(by * height, (by + bh) * height, height)
        if ox0 < x1 and ox1 > x0 and oy0 < y1 and oy1 > y0:
            kept.append(obj)
    return SceneState(objects=tuple(kept), canvas_w=scene.canvas_w,
                      canvas_h=scene.canvas_h, background=scene.background,
                      turn_index=scene.turn_index)


@dataclass
class ExecutorConfig:
    feather_sigma: Optional[float] = 0.0   # None -> size-relative default
    margin: Optional[int] = None           # None -> 2% of image diagonal
    padding: int = DEFAULT_PADDING

    def feather_for(self, patch: LayerPatch) -> float:
        if self.feather_sigma is None:
            return default_feather(patch.width, patch.height)
        return self.feather_sigma


@dataclass(frozen=True)
class ExecutionResult:
    image: np.ndarray
    node: ImageContext
    scene: SceneState
    attempts_used: int = 1


def describe_command(command: EditCommand) -> str:
    """Template description for a node produced by a command (synthetic mode)."""
    from .scene import Adjust, Remove
    if isinstance(command, Adjust):
        return f"adjusted {command.attribute} of {command.object_id} to {command.value}"
    if isinstance(command, Remove):
        return f"removed {command.object_id}"
    if isinstance(command, Add):
        return f"added {command.spec.object_id}"
    if isinstance(command, Replace):
        return f"replaced {command.object_id} with {command.replacement.name}"
    return "reverted to a previous state"


def execute_atomic(image: np.ndarray, scene: SceneState, command: EditCommand,
                   backend, graph: StateGraph, *, parent_uri: str,
                   blobs=None, config: Optional[ExecutorConfig] = None,
                   undo_target_uri: Optional[str] = None) -> ExecutionResult:
    """Run one command through localize -> crop -> backend -> blend -> record.

    Errors propagate before anything is recorded, so a failed call leaves
    image, scene, and graph exactly as they were. Undo bypasses the backend:
    it rolls the head back to undo_target_uri (the planner's previous turn
    boundary) or, by default, the current node's parent, and returns that
    node's image and state.
    """
    config = config or ExecutorConfig()
    if isinstance(command, Undo):
        target_uri = undo_target_uri
        if target_uri is None:
            head = graph.node(parent_uri)
            if head.parent_uri is None:
                raise UnknownParent("undo at the root: no previous state")
            target_uri = head.parent_uri
        parent = rollback(graph, target_uri)
        data = blobs.get(parent.uri) if blobs is not None else None
        pixels = decode_png(data) if data is not None else None
        return ExecutionResult(image=pixels, node=parent, scene=parent.scene_ref)

    from .backends import BackendRequest  # local import to avoid a cycle
    post_scene = apply_transition(scene, [command])
    height, width = image.shape[:2]
    mask = localize(image, scene, command, config.margin)
    if getattr(backend, "scope", "patch") == "full":
        patch = LayerPatch(pixels=image.copy(), origin=(0, 0),
                           mask_local=mask.copy(), padding=0)
    else:
        patch = crop_layer(image, mask, config.padding)
    local_scene = restrict_scene(scene, patch.window(), width, height)
    request = BackendRequest(
        operation=command_kind(command),
        patch=patch,
        command=command,
        local_scene=local_scene,
        canvas_size=(width, height),
    )
    response = backend.edit(request)
    if response.patch.pixels.shape != patch.pixels.shape:
        from .errors import DimensionMismatch
        raise DimensionMismatch(
            f"backend returned {response.patch.pixels.shape}, expected {patch.pixels.shape}")
    if getattr(backend, "scope", "patch") == "full":
        out = response.patch.pixels
    else:
        out = blend(image, response.patch, config.feather_for(patch))
    node = record_image(graph, encode_png(out), parent_uri,
                        command_kind(command), describe_command(command),
                        scene_ref=post_scene, blobs=blobs)
    return ExecutionResult(image=out, node=node, scene=post_scene,
                           attempts_used=getattr(response, "attempts_used", 1))
