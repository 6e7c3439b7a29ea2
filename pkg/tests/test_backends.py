"""Backends: symbolic oracle, remote HTTP bridge, degrading baseline."""

import base64
from fractions import Fraction

import numpy as np
import pytest

from editloop.backends import (
    BackendRequest,
    DegradingBackend,
    RemoteBackend,
    SymbolicBackend,
    request_wire_body,
)
from editloop.errors import BackendRejected, DimensionMismatch, MissingScene
from editloop.images import decode_png, encode_png
from editloop.layers import LayerPatch, crop_layer, localize
from editloop.raster import render
from editloop.scene import (
    Add,
    Adjust,
    ObjectSpec,
    Replace,
    Replacement,
    SceneState,
)

from mockserver import ScriptedServer


def obj(oid, color="red", size="large", material="matte", shape="rectangle",
        bbox=(Fraction(1, 4), Fraction(1, 4), Fraction(1, 2), Fraction(1, 2)), z=1):
    return ObjectSpec(object_id=oid, name=oid, color=color, size=size,
                      material=material, shape=shape, bbox=bbox, z_order=z)


def scene(*objects, background="white", w=64, h=64):
    return SceneState(objects=tuple(objects), canvas_w=w, canvas_h=h,
                      background=background)


def make_request(s, command, margin=2, padding=4):
    img = render(s, s.canvas_w, s.canvas_h)
    mask = localize(img, s, command, margin=margin)
    patch = crop_layer(img, mask, padding=padding)
    return BackendRequest(operation="adjust", patch=patch, command=command,
                          local_scene=s, canvas_size=(s.canvas_w, s.canvas_h))


class TestSymbolicBackend:
    def test_identity_adjust_returns_identical_patch(self):
        s = scene(obj("a", color="red", material="glossy"))
        req = make_request(s, Adjust("a", "color", "red"))
        resp = SymbolicBackend().edit(req)
        assert (resp.patch.pixels == req.patch.pixels).all()

    def test_replace_matches_full_render_crop(self):
        s = scene(obj("a", shape="circle", material="striped"))
        cmd = Replace("a", Replacement(name="marker", shape="triangle", color="navy"))
        req = make_request(s, cmd)
        resp = SymbolicBackend().edit(req)
        from editloop.scene import apply_transition
        post_full = render(apply_transition(s, [cmd]), 64, 64)
        x0, y0, x1, y1 = req.patch.window()
        assert (resp.patch.pixels == post_full[y0:y1, x0:x1]).all()

    def test_add_keeps_uncovered_patch_pixels(self):
        s = scene(obj("a", bbox=(Fraction(1, 16), Fraction(1, 16),
                                 Fraction(1, 8), Fraction(1, 8))))
        new = obj("b", color="teal", shape="circle",
                  bbox=(Fraction(1, 2), Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)),
                  z=2)
        cmd = Add(new)
        req = make_request(s, cmd, margin=2, padding=4)
        resp = SymbolicBackend().edit(req)
        from editloop.raster import coverage_mask
        x0, y0, x1, y1 = req.patch.window()
        added = coverage_mask(new, 64, 64)[y0:y1, x0:x1]
        assert added.any()
        assert (resp.patch.pixels[added] != req.patch.pixels[added]).any(axis=-1).all()
        assert (resp.patch.pixels[~added] == req.patch.pixels[~added]).all()

    def test_missing_scene(self):
        s = scene(obj("a"))
        req = make_request(s, Adjust("a", "color", "navy"))
        req = BackendRequest(operation=req.operation, patch=req.patch,
                             command=req.command, local_scene=None,
                             canvas_size=req.canvas_size)
        with pytest.raises(MissingScene):
            SymbolicBackend().edit(req)


class TestRemoteBackend:
    def test_echo_round_trip(self):
        s = scene(obj("a"))
        req = make_request(s, Adjust("a", "color", "navy"))

        def echo(body):
            return 200, {"patch_png_base64": body["patch_png_base64"],
                         "diagnostics": "echoed"}

        with ScriptedServer() as server:
            server.default = echo
            backend = RemoteBackend(server.url, retries=1, backoff=0)
            resp = backend.edit(req)
        assert (resp.patch.pixels == req.patch.pixels).all()
        assert resp.diagnostics == "echoed"

    def test_wrong_dimensions_rejected(self):
        s = scene(obj("a"))
        req = make_request(s, Adjust("a", "color", "navy"))
        wrong = encode_png(np.zeros((3, 3, 3), dtype=np.uint8))

        with ScriptedServer() as server:
            server.default = lambda body: (
                200, {"patch_png_base64": base64.b64encode(wrong).decode()})
            backend = RemoteBackend(server.url, retries=1, backoff=0)
            with pytest.raises(DimensionMismatch):
                backend.edit(req)

    def test_retry_schedule_two_failures_then_success(self):
        s = scene(obj("a"))
        req = make_request(s, Adjust("a", "color", "navy"))

        def fail(body):
            return 503, {"error": "busy"}

        def ok(body):
            return 200, {"patch_png_base64": body["patch_png_base64"]}

        with ScriptedServer() as server:
            server.script = [fail, fail, ok]
            backend = RemoteBackend(server.url, retries=3, backoff=0)
            resp = backend.edit(req)
        assert resp.attempts_used == 3

    def test_exhausted_retries_raise(self):
        s = scene(obj("a"))
        req = make_request(s, Adjust("a", "color", "navy"))
        with ScriptedServer() as server:
            server.default = lambda body: (500, {"error": "nope"})
            backend = RemoteBackend(server.url, retries=2, backoff=0)
            with pytest.raises(BackendRejected):
                backend.edit(req)
        assert len(server.requests) == 2

    def test_wire_body_fields(self):
        s = scene(obj("a"))
        req = make_request(s, Adjust("a", "color", "navy"))
        body = request_wire_body(req)
        assert set(body) == {"operation", "command", "patch_png_base64",
                             "mask_png_base64", "origin"}
        decoded = decode_png(base64.b64decode(body["patch_png_base64"]))
        assert (decoded == req.patch.pixels).all()
        assert body["origin"] == list(req.patch.origin)


def full_frame_request(s, command):
    img = render(s, s.canvas_w, s.canvas_h)
    mask = localize(img, s, command, margin=2)
    patch = LayerPatch(pixels=img, origin=(0, 0), mask_local=mask, padding=0)
    return BackendRequest(operation="adjust", patch=patch, command=command,
                          local_scene=s, canvas_size=(s.canvas_w, s.canvas_h))


def laplacian_energy(img):
    g = img.astype(np.float64).mean(axis=2)
    return np.abs(4 * g[1:-1, 1:-1] - g[:-2, 1:-1] - g[2:, 1:-1]
                  - g[1:-1, :-2] - g[1:-1, 2:]).mean()


class TestDegradingBackend:
    def test_high_frequency_energy_drops(self):
        s = scene(obj("a", color="black", material="striped"), background="white")
        req = full_frame_request(s, Adjust("a", "color", "black"))
        resp = DegradingBackend(seed=1).edit(req)
        assert laplacian_energy(resp.patch.pixels) < laplacian_energy(req.patch.pixels)

    def test_chained_drift_monotone(self):
        s = scene(obj("a", color="navy", material="dotted"), background="cream")
        original = render(s, 64, 64)
        backend = DegradingBackend(seed=7)
        img = original
        drifts = []
        for _ in range(5):
            mask = localize(img, s, Adjust("a", "color", "navy"), margin=2)
            patch = LayerPatch(pixels=img, origin=(0, 0), mask_local=mask, padding=0)
            req = BackendRequest(operation="adjust", patch=patch,
                                 command=Adjust("a", "color", "navy"),
                                 local_scene=s, canvas_size=(64, 64))
            img = backend.edit(req).patch.pixels
            drifts.append(np.abs(img.astype(np.float64) - original).mean())
        assert all(b >= a for a, b in zip(drifts, drifts[1:]))

    def test_seed_determinism(self):
        s = scene(obj("a"))
        req = full_frame_request(s, Adjust("a", "color", "red"))
        out1 = DegradingBackend(seed=42).edit(req).patch.pixels
        out2 = DegradingBackend(seed=42).edit(req).patch.pixels
        out3 = DegradingBackend(seed=43).edit(req).patch.pixels
        assert (out1 == out2).all()
        assert (out1 != out3).any()
