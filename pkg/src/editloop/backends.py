"""Edit backends: the deterministic scene oracle, an HTTP bridge to real
editors, and a full-frame degrading baseline for drift experiments.

A backend receives a patch plus the command and returns an edited patch of
identical dimensions. Backends with scope="full" instead receive and return
the whole frame (they model editors that re-synthesize the entire image).
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass, replace as dc_replace
from typing import Optional

import numpy as np
import requests

from .errors import BackendRejected, BackendTimeout, DimensionMismatch, MissingScene
from .filters import gaussian_blur, round_half_away
from .images import decode_png, encode_png
from .layers import LayerPatch
from .raster import render_window
from .rng import derive_seed, u64_stream
from .scene import EditCommand, SceneState, apply_transition, command_to_json


@dataclass(frozen=True)
class BackendRequest:
    operation: str                      # add | remove | replace | adjust
    patch: LayerPatch
    command: EditCommand
    local_scene: Optional[SceneState]   # scene restricted to the patch window
    canvas_size: tuple[int, int]        # (width, height) of the full canvas


@dataclass(frozen=True)
class BackendResponse:
    patch: LayerPatch
    diagnostics: str = ""
    attempts_used: int = 1


class SymbolicBackend:
    """Oracle editor: re-renders the patch window from the post-edit scene.

    Deterministic stand-in for a generative editor; lets the whole pipeline
    be verified bit-for-bit at desk scale.
    """

    scope = "patch"

    def edit(self, request: BackendRequest) -> BackendResponse:
        if request.local_scene is None:
            raise MissingScene("symbolic editing needs the scene for the patch")
        post = apply_transition(request.local_scene, [request.command])
        width, height = request.canvas_size
        pixels = render_window(post, width, height, request.patch.window())
        return BackendResponse(
            patch=dc_replace(request.patch, pixels=pixels),
            diagnostics="re-rendered from post-edit scene",
        )


def request_wire_body(request: BackendRequest) -> dict:
    """JSON body for the remote protocol (PNG payloads base64-encoded)."""
    mask_png = encode_png(
        np.repeat(request.patch.mask_local[..., None].astype(np.uint8) * 255, 3, axis=2))
    return {
        "operation": request.operation,
        "command": command_to_json(request.command),
        "patch_png_base64": base64.b64encode(encode_png(request.patch.pixels)).decode(),
        "mask_png_base64": base64.b64encode(mask_png).decode(),
        "origin": list(request.patch.origin),
    }


class RemoteBackend:
    """HTTP bridge: POSTs the patch to an editing endpoint.

    Applies a per-request timeout and bounded retries with exponential
    backoff; a response with different patch dimensions is a protocol
    violation and fails immediately.
    """

    scope = "patch"

    def __init__(self, endpoint: str, *, timeout: float = 30.0, retries: int = 3,
                 backoff: float = 0.5, auth_token: Optional[str] = None):
        if not endpoint:
            raise ValueError("endpoint must be configured")
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.auth_token = auth_token

    def edit(self, request: BackendRequest) -> BackendResponse:
        body = request_wire_body(request)
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        last_error: Exception = BackendRejected("no attempt made")
        for attempt in range(1, self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json=body, headers=headers,
                                     timeout=self.timeout)
            except requests.Timeout:
                last_error = BackendTimeout(f"no response within {self.timeout}s")
            except requests.RequestException as exc:
                last_error = BackendRejected(f"transport failure: {exc}")
            else:
                if resp.status_code // 100 == 2:
                    try:
                        payload = resp.json()
                        pixels = decode_png(base64.b64decode(payload["patch_png_base64"]))
                        diagnostics = payload.get("diagnostics", "")
                    except Exception as exc:
                        raise BackendRejected(f"malformed response body: {exc}") from exc
                    if pixels.shape != request.patch.pixels.shape:
                        raise DimensionMismatch(
                            f"remote returned {pixels.shape}, expected {request.patch.pixels.shape}")
                    return BackendResponse(
                        patch=dc_replace(request.patch, pixels=pixels),
                        diagnostics=diagnostics,
                        attempts_used=attempt,
                    )
                last_error = BackendRejected(f"status {resp.status_code}")
            if attempt < self.retries:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
        raise last_error


class DegradingBackend:
    """Full-frame baseline that re-encodes the whole image every call.

    Applies the correct symbolic edit, then blurs the entire frame and pulls
    it toward a fixed seeded noise field — a stand-in for a generator's
    texture prior. Repeated calls wash out high-frequency detail everywhere
    and accumulate a consistent bias: the drift pathology of editors that
    resample the full image per step.
    """

    scope = "full"

    def __init__(self, seed: int = 0, blur_sigma: float = 0.6,
                 noise_amplitude: int = 2):
        self.seed = seed
        self.blur_sigma = blur_sigma
        self.noise_amplitude = noise_amplitude
        self._calls = 0

    def _prior_field(self, height: int, width: int) -> np.ndarray:
        amp = self.noise_amplitude
        words = u64_stream(derive_seed(self.seed, "texture-prior"), height * width)
        field = (words % np.uint64(2 * amp + 1)).astype(np.float64) - amp
        return field.reshape(height, width, 1)

    def edit(self, request: BackendRequest) -> BackendResponse:
        if request.local_scene is None:
            raise MissingScene("degrading baseline applies the symbolic edit first")
        post = apply_transition(request.local_scene, [request.command])
        width, height = request.canvas_size
        edited = render_window(post, width, height, request.patch.window())
        # Paste the correct edit into the current frame, then degrade all of it.
        frame = request.patch.pixels.copy()
        frame[request.patch.mask_local] = edited[request.patch.mask_local]
        blurred = gaussian_blur(frame.astype(np.float64), self.blur_sigma)
        self._calls += 1
        out = round_half_away(blurred + self._prior_field(*frame.shape[:2]))
        return BackendResponse(
            patch=dc_replace(request.patch, pixels=out),
            diagnostics=f"full-frame re-encode #{self._calls}",
        )
