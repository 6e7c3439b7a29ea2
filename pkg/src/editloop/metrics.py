"""Turn-level evaluation: state-match scores, Otsu-masked fidelity metrics,
and drift statistics across turns.

Two complementary views of an edit:

* symbolic — did every targeted object reach its requested attributes
  (instruction-following score), and did every bystander stay untouched
  (consistency score)? Both average binary attribute correctness over
  objects: score = (1/N) * sum_i (1/M_i) * sum_j s_ij with M_i = 4
  attributes (color, size, material, shape) and binary s_ij.
* pixel — difference map between pre and post images, thresholded by Otsu's
  criterion into changed foreground vs background; PSNR/SSIM and an optional
  perceptual distance are computed on the background only, so legitimate
  foreground edits do not drown out background damage.

The bundled perceptual provider is a gradient-magnitude distance, clearly
labeled NOT-LPIPS: it is a trend instrument for drift experiments, never a
substitute for a learned perceptual metric.
"""

from __future__ import annotations

import base64
import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import requests

from .errors import (
    DimensionMismatch,
    EmptyHistogram,
    EmptyMask,
    LayoutError,
    MaskTooThin,
    ProviderUnavailable,
)
from .filters import gaussian_kernel
from .images import decode_png, encode_png
from .scene import SceneState, command_target, diff_states
from .vocab import ADJUSTABLE_ATTRIBUTES

SCHEMA_VERSION = 1

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11x11 window
PSNR_CAP = 100.0


# --- state-based scores ---------------------------------------------------------

@dataclass(frozen=True)
class AttributeScore:
    object_id: str
    attribute_name: str
    s_ij: int

    def __post_init__(self):
        if self.s_ij not in (0, 1):
            raise ValueError("attribute scores are binary")


def _bbox_iou(a, b) -> Fraction:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(Fraction(0), min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(Fraction(0), min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else Fraction(0)


def match_objects(predicted: SceneState, target: SceneState) -> dict:
    """target_id -> predicted object (or None): match by name, ties by IoU."""
    pool = list(predicted.objects)
    matches = {}
    for tgt in target.objects:
        candidates = [p for p in pool if p.name == tgt.name]
        if not candidates:
            matches[tgt.object_id] = None
            continue
        best = max(candidates, key=lambda p: (_bbox_iou(p.bbox, tgt.bbox),
                                              -pool.index(p)))
        matches[tgt.object_id] = best
        pool.remove(best)
    return matches


def _score_object(tgt, pred) -> list[AttributeScore]:
    rows = []
    for attr in ADJUSTABLE_ATTRIBUTES:
        if pred is None:
            s = 0
        else:
            s = 1 if pred.attribute(attr) == tgt.attribute(attr) else 0
        rows.append(AttributeScore(tgt.object_id, attr, s))
    return rows


def score_if(predicted: SceneState, target: SceneState,
             edited_ids: set[str]) -> tuple[float, list[AttributeScore]]:
    """Instruction-following score over the edited objects in the target.

    A required-but-missing object contributes all zeros. Removed objects
    have no row in the target and are not scorable here (a removal that
    failed shows up as an extra object in the consistency score); a turn
    with no scorable edited object is vacuously 1.0.
    """
    matches = match_objects(predicted, target)
    rows: list[AttributeScore] = []
    per_object: list[float] = []
    for tgt in target.objects:
        if tgt.object_id not in edited_ids:
            continue
        obj_rows = _score_object(tgt, matches[tgt.object_id])
        rows.extend(obj_rows)
        per_object.append(sum(r.s_ij for r in obj_rows) / len(obj_rows))
    if not per_object:
        return 1.0, []
    return sum(per_object) / len(per_object), rows


def score_ic(predicted: SceneState, target: SceneState,
             preserved_ids: set[str]) -> tuple[float, list[AttributeScore]]:
    """Consistency score over preserved objects, charging spurious extras.

    Every unexpected predicted object (matched to no target object) counts
    as one all-zero object: over-editing lowers consistency even when all
    real bystanders survived.
    """
    matches = match_objects(predicted, target)
    rows: list[AttributeScore] = []
    per_object: list[float] = []
    for tgt in target.objects:
        if tgt.object_id not in preserved_ids:
            continue
        obj_rows = _score_object(tgt, matches[tgt.object_id])
        rows.extend(obj_rows)
        per_object.append(sum(r.s_ij for r in obj_rows) / len(obj_rows))
    matched = {p.object_id for p in matches.values() if p is not None}
    extras = [p for p in predicted.objects if p.object_id not in matched]
    for extra in extras:
        rows.extend(AttributeScore(extra.object_id, attr, 0)
                    for attr in ADJUSTABLE_ATTRIBUTES)
        per_object.append(0.0)
    if not per_object:
        return 1.0, []
    return sum(per_object) / len(per_object), rows


# --- difference maps and the Otsu split --------------------------------------------

@dataclass(frozen=True)
class DiffMap:
    width: int
    height: int
    values: np.ndarray      # (h, w) uint8 difference levels
    histogram: np.ndarray   # 256 bins, sums to width*height


def diff_map(pre: np.ndarray, post: np.ndarray) -> DiffMap:
    """Per-pixel difference level: channel-max absolute byte difference."""
    if pre.shape != post.shape:
        raise DimensionMismatch(f"{pre.shape} vs {post.shape}")
    delta = np.abs(pre.astype(np.int16) - post.astype(np.int16)).max(axis=2)
    values = delta.astype(np.uint8)
    histogram = np.bincount(values.ravel(), minlength=256)
    return DiffMap(width=pre.shape[1], height=pre.shape[0],
                   values=values, histogram=histogram)


def otsu_threshold(histogram: np.ndarray) -> Optional[int]:
    """Threshold maximizing between-class variance over splits k = 1..255.

    The split puts levels <= k in the background class. Ties break to the
    smallest k. Returns None (degenerate) when every split leaves one class
    empty — a uniform map.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    if hist.sum() <= 0:
        raise EmptyHistogram("histogram has no mass")
    levels = np.arange(256, dtype=np.float64)
    total = hist.sum()
    cum = np.cumsum(hist)
    cum_mean = np.cumsum(hist * levels)
    grand_mean = cum_mean[-1]
    w0 = cum[:-1]                # class weight for k = 0..254 (levels <= k)
    w1 = total - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(w0 > 0, cum_mean[:-1] / w0, 0.0)
        mu1 = np.where(w1 > 0, (grand_mean - cum_mean[:-1]) / w1, 0.0)
        sigma_b = np.where((w0 > 0) & (w1 > 0),
                           w0 * w1 * (mu0 - mu1) ** 2, 0.0)
    # index i corresponds to split k = i; valid k range is 1..255
    sigma_b = sigma_b[1:]
    if sigma_b.max() <= 0.0:
        return None
    return int(np.argmax(sigma_b)) + 1


def background_mask(pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Pixels whose difference level is at or below the Otsu threshold.

    A degenerate (uniform) difference map means nothing was singled out as
    changed, so everything counts as background.
    """
    dm = diff_map(pre, post)
    k = otsu_threshold(dm.histogram)
    if k is None:
        return np.ones_like(dm.values, dtype=bool)
    return dm.values <= k


# --- masked fidelity metrics ---------------------------------------------------------

def masked_psnr(pre: np.ndarray, post: np.ndarray, mask: np.ndarray) -> float:
    """PSNR over masked pixels only (all channels); capped at 100 dB."""
    if not mask.any():
        raise EmptyMask("psnr needs at least one masked pixel")
    a = pre[mask].astype(np.float64)
    b = post[mask].astype(np.float64)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP
    return min(10.0 * math.log10(255.0 ** 2 / mse), PSNR_CAP)


def _gray(img: np.ndarray) -> np.ndarray:
    w = LUMA_WEIGHTS
    return (w[0] * img[..., 0] + w[1] * img[..., 1]
            + w[2] * img[..., 2]).astype(np.float64)


def _ssim_window_filter(values: np.ndarray) -> np.ndarray:
    kernel = gaussian_kernel(SSIM_SIGMA)
    assert len(kernel) == 2 * SSIM_RADIUS + 1
    from .filters import _convolve_axis
    return _convolve_axis(_convolve_axis(values, kernel, 0), kernel, 1)


def ssim_map(pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Per-pixel structural similarity on grayscale with an 11x11 window."""
    x = _gray(pre)
    y = _gray(post)
    mu_x = _ssim_window_filter(x)
    mu_y = _ssim_window_filter(y)
    sigma_x = _ssim_window_filter(x * x) - mu_x * mu_x
    sigma_y = _ssim_window_filter(y * y) - mu_y * mu_y
    sigma_xy = _ssim_window_filter(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return num / den


def _fully_supported(mask: np.ndarray, radius: int) -> np.ndarray:
    """Centers whose entire (2r+1)^2 window lies inside both mask and image."""
    from scipy.ndimage import binary_erosion
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return binary_erosion(mask, structure=structure, border_value=0)


def masked_ssim(pre: np.ndarray, post: np.ndarray, mask: np.ndarray) -> float:
    """Mean SSIM over pixels whose whole window support lies in the mask."""
    if not mask.any():
        raise EmptyMask("ssim needs a nonempty mask")
    if min(pre.shape[0], pre.shape[1]) < 2 * SSIM_RADIUS + 1:
        raise ValueError("images must be at least 11x11")
    valid = _fully_supported(mask, SSIM_RADIUS)
    if not valid.any():
        raise MaskTooThin("no pixel has full window support inside the mask")
    return float(ssim_map(pre, post)[valid].mean())


# --- perceptual providers --------------------------------------------------------------

class GradientMagnitudeProvider:
    """Bundled non-neural fallback: mean masked gradient-magnitude distance.

    Label says it all: NOT-LPIPS. Symmetric, zero on identical images,
    sensitive to progressive blurring — good for drift trends only.
    """

    name = "grad-struct-not-lpips"

    def score(self, pre: np.ndarray, post: np.ndarray, mask: np.ndarray) -> float:
        if not mask.any():
            raise EmptyMask("perceptual distance needs a nonempty mask")
        # The gradient has 1-pixel support, so average only over centers
        # whose whole stencil lies inside the mask (same rule as SSIM's
        # window erosion); pixels just outside the mask cannot leak in.
        support = _fully_supported(mask, 1)
        if not support.any():
            raise MaskTooThin("no pixel has full gradient support in the mask")
        gy1, gx1 = np.gradient(_gray(pre))
        gy2, gx2 = np.gradient(_gray(post))
        g1 = np.hypot(gx1, gy1)
        g2 = np.hypot(gx2, gy2)
        return float(np.abs(g1 - g2)[support].mean() / 255.0)


class RemotePerceptualProvider:
    """HTTP provider: {pre,post,mask} PNGs in, {"score": float} out."""

    def __init__(self, endpoint: str, name: str = "remote-perceptual",
                 timeout: float = 30.0):
        self.endpoint = endpoint
        self.name = name
        self.timeout = timeout

    def score(self, pre: np.ndarray, post: np.ndarray, mask: np.ndarray) -> float:
        mask_rgb = np.repeat(mask[..., None].astype(np.uint8) * 255, 3, axis=2)
        body = {
            "pre_png_base64": base64.b64encode(encode_png(pre)).decode(),
            "post_png_base64": base64.b64encode(encode_png(post)).decode(),
            "mask_png_base64": base64.b64encode(encode_png(mask_rgb)).decode(),
        }
        try:
            resp = requests.post(self.endpoint, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"perceptual endpoint unreachable: {exc}") from exc
        if resp.status_code // 100 != 2:
            raise ProviderUnavailable(f"perceptual endpoint returned {resp.status_code}")
        try:
            return float(resp.json()["score"])
        except Exception as exc:
            raise ProviderUnavailable(f"malformed provider payload: {exc}") from exc


def perceptual_om(pre: np.ndarray, post: np.ndarray, mask: np.ndarray,
                  provider) -> float:
    """Perceptual distance over the masked region via the configured provider."""
    if provider is None:
        raise ProviderUnavailable("no perceptual provider configured")
    return provider.score(pre, post, mask)


# --- per-turn evaluation -----------------------------------------------------------------

@dataclass(frozen=True)
class TurnScore:
    turn_index: int
    if_score: float
    ic_score: float
    psnr_om: float
    ssim_om: float
    mask_coverage: float
    perceptual_om: Optional[float] = None
    perceptual_name: Optional[str] = None
    drift_from_root: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "if_score": self.if_score,
            "ic_score": self.ic_score,
            "psnr_om": self.psnr_om,
            "ssim_om": self.ssim_om,
            "mask_coverage": self.mask_coverage,
            "perceptual_om": self.perceptual_om,
            "perceptual_name": self.perceptual_name,
            "drift_from_root": self.drift_from_root,
        }


def turn_edit_sets(session, turn: int) -> tuple[set[str], set[str]]:
    """(edited_ids, preserved_ids) for 1-based turn t, from commands + states."""
    target = session.states[turn]
    previous = session.states[turn - 1]
    edited = diff_states(previous, target).ids_touched()
    for cmd in session.commands[turn - 1]:
        cid = command_target(cmd)
        if cid is not None:
            edited.add(cid)
    edited &= set(target.ids())
    preserved = set(target.ids()) - edited
    return edited, preserved


def _pixel_scores(pre_image, post_image, provider, root_image):
    bg = background_mask(pre_image, post_image)
    psnr = masked_psnr(pre_image, post_image, bg)
    try:
        ssim = masked_ssim(pre_image, post_image, bg)
    except MaskTooThin:
        ssim = float("nan")
    perceptual = None
    perceptual_name = None
    drift = None
    if provider is not None:
        try:
            perceptual = perceptual_om(pre_image, post_image, bg, provider)
        except MaskTooThin:
            perceptual = None
        perceptual_name = provider.name
        if root_image is not None:
            root_bg = background_mask(root_image, post_image)
            try:
                drift = perceptual_om(root_image, post_image, root_bg, provider)
            except MaskTooThin:
                drift = None
    return bg, psnr, ssim, perceptual, perceptual_name, drift


def score_turn(session, turn: int, perceived: SceneState,
               pre_image: np.ndarray, post_image: np.ndarray,
               provider=None, root_image: Optional[np.ndarray] = None) -> TurnScore:
    """All metrics for one turn of a benchmark session."""
    target = session.states[turn]
    edited, preserved = turn_edit_sets(session, turn)
    if_value, _ = score_if(perceived, target, edited)
    ic_value, _ = score_ic(perceived, target, preserved)
    bg, psnr, ssim, perceptual, perceptual_name, drift = _pixel_scores(
        pre_image, post_image, provider, root_image)
    return TurnScore(
        turn_index=turn,
        if_score=if_value,
        ic_score=ic_value,
        psnr_om=psnr,
        ssim_om=ssim,
        mask_coverage=float(bg.mean()),
        perceptual_om=perceptual,
        perceptual_name=perceptual_name,
        drift_from_root=drift,
    )


def score_turn_pair(pre_scene: SceneState, perceived: SceneState,
                    target: SceneState, pre_image: np.ndarray,
                    post_image: np.ndarray, turn_index: int,
                    provider=None,
                    root_image: Optional[np.ndarray] = None) -> TurnScore:
    """Metrics for a free-standing turn (service sessions, no benchmark).

    The edited set is whatever differs between the turn's start and target
    states; everything else in the target is the preserved set.
    """
    edited = diff_states(pre_scene, target).ids_touched() & set(target.ids())
    preserved = set(target.ids()) - edited
    if_value, _ = score_if(perceived, target, edited)
    ic_value, _ = score_ic(perceived, target, preserved)
    bg, psnr, ssim, perceptual, perceptual_name, drift = _pixel_scores(
        pre_image, post_image, provider, root_image)
    return TurnScore(
        turn_index=turn_index,
        if_score=if_value,
        ic_score=ic_value,
        psnr_om=psnr,
        ssim_om=ssim,
        mask_coverage=float(bg.mean()),
        perceptual_om=perceptual,
        perceptual_name=perceptual_name,
        drift_from_root=drift,
    )


_SUMMARY_METRICS = ("if_score", "ic_score", "psnr_om", "ssim_om",
                    "perceptual_om", "drift_from_root")


def summarize(scores: list[TurnScore]) -> dict:
    """Unweighted mean of each metric across turns."""
    out = {}
    for metric in _SUMMARY_METRICS:
        values = [getattr(s, metric) for s in scores
                  if getattr(s, metric) is not None
                  and not math.isnan(getattr(s, metric))]
        out[metric] = sum(values) / len(values) if values else None
    out["n_turns"] = len(scores)
    return out


def evaluate_session(session_dir: str, outputs_dir: str,
                     provider=None) -> tuple[list[TurnScore], dict]:
    """Score every turn of one session against a system's outputs.

    Expects the documented layouts: the benchmark session directory, and an
    outputs directory containing images/t{t}.png plus states/t{t}.json (the
    perceived post-state per turn). A missing turn output scores as total
    failure: the state is carried over unchanged and the image is the
    turn's input.
    """
    from .scene import loads_state
    from .synth import load_session
    session = load_session(session_dir)
    if provider is None:
        provider = GradientMagnitudeProvider()
    root_image = decode_png(session.images[0])
    pre_image = root_image
    perceived_prev = session.states[0]
    scores = []
    for t in range(1, session.n_turns + 1):
        img_path = os.path.join(outputs_dir, "images", f"t{t}.png")
        state_path = os.path.join(outputs_dir, "states", f"t{t}.json")
        if os.path.exists(img_path) and os.path.exists(state_path):
            post_image = decode_png(open(img_path, "rb").read())
            perceived = loads_state(open(state_path, encoding="utf-8").read())
        else:
            post_image = pre_image
            perceived = perceived_prev
        if post_image.shape != pre_image.shape:
            raise LayoutError(
                f"turn {t} output has shape {post_image.shape}, input {pre_image.shape}")
        score = score_turn(session, t, perceived, pre_image, post_image,
                           provider=provider, root_image=root_image)
        if not (os.path.exists(img_path) and os.path.exists(state_path)):
            score = TurnScore(**{**score.to_json(),
                                 "if_score": 0.0,
                                 "perceptual_name": score.perceptual_name})
        scores.append(score)
        pre_image = post_image
        perceived_prev = perceived
    return scores, summarize(scores)


# --- drift report -----------------------------------------------------------------------

@dataclass(frozen=True)
class DriftStats:
    slope: float
    max_delta: float
    increasing_psnr_flag: bool = False


def _slope(values: list[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    xs = list(range(1, n + 1))
    x_mean = sum(xs) / n
    y_mean = sum(values) / n
    num = sum((x - x_mean) * (y - y_mean) for x, y in zip(xs, values))
    den = sum((x - x_mean) ** 2 for x in xs)
    return num / den


def _max_delta(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return max(abs(b - a) for a, b in zip(values, values[1:]))


def mean_turn_series(score_lists: list[list[TurnScore]]) -> dict[str, list[float]]:
    """Per-turn mean of each metric across many sessions of equal length."""
    n_turns = len(score_lists[0])
    series: dict[str, list[float]] = {}
    for metric in _SUMMARY_METRICS:
        per_turn = []
        for t in range(n_turns):
            values = [getattr(scores[t], metric) for scores in score_lists
                      if getattr(scores[t], metric) is not None
                      and not math.isnan(getattr(scores[t], metric))]
            per_turn.append(sum(values) / len(values) if values else float("nan"))
        series[metric] = per_turn
    return series


def drift_report(series_by_system: dict[str, dict[str, list[float]]]) -> dict:
    """Per-system drift statistics over per-turn metric series.

    Requires >= 2 turns. A system whose psnr_om strictly increases turn over
    turn gets flagged: steadily rising background-PSNR across turns is the
    signature of whole-image re-synthesis shrinking its own difference mask,
    not of genuine fidelity.
    """
    report = {"schema_version": SCHEMA_VERSION, "systems": {}}
    for system, series in series_by_system.items():
        entry = {"series": series, "stats": {}}
        for metric, values in series.items():
            clean = [v for v in values if not math.isnan(v)]
            if len(clean) < 2:
                stats = DriftStats(slope=0.0, max_delta=0.0)
            else:
                deltas = [b - a for a, b in zip(clean, clean[1:])]
                stats = DriftStats(
                    slope=_slope(clean),
                    max_delta=_max_delta(clean),
                    increasing_psnr_flag=(metric == "psnr_om"
                                          and all(d > 0 for d in deltas)),
                )
            entry["stats"][metric] = {
                "slope": stats.slope,
                "max_delta": stats.max_delta,
                "increasing_psnr_flag": stats.increasing_psnr_flag,
            }
        entry["flagged"] = entry["stats"].get("psnr_om", {}).get(
            "increasing_psnr_flag", False)
        report["systems"][system] = entry
    return report


def drift_series_csv(report: dict) -> str:
    lines = ["system,metric,turn,value"]
    for system, entry in report["systems"].items():
        for metric, values in entry["series"].items():
            for t, v in enumerate(values, start=1):
                lines.append(f"{system},{metric},{t},{v}")
    return "\n".join(lines) + "\n"


def render_text_table(scores: list[TurnScore], summary: dict,
                      title: str = "session") -> str:
    header = f"{'turn':>4}  {'IF':>6}  {'IC':>6}  {'PSNR_OM':>8}  {'SSIM_OM':>8}  {'coverage':>8}"
    lines = [f"== {title} ==", header]
    for s in scores:
        lines.append(f"{s.turn_index:>4}  {s.if_score:>6.3f}  {s.ic_score:>6.3f}  "
                     f"{s.psnr_om:>8.2f}  {s.ssim_om:>8.4f}  {s.mask_coverage:>8.3f}")
    lines.append(f"mean  {summary['if_score']:>6.3f}  {summary['ic_score']:>6.3f}  "
                 f"{summary['psnr_om']:>8.2f}  {summary['ssim_om']:>8.4f}")
    return "\n".join(lines)
