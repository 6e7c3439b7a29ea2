"""PNG encoding/decoding and content addressing for image buffers."""

from __future__ import annotations

import hashlib
import io

import numpy as np
from PIL import Image

URI_PREFIX = "img-"


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 buffer as a PNG byte string."""
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) uint8 array")
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def content_uri(data: bytes) -> str:
    """Content-addressed identifier: 'img-' + lowercase sha256 of the bytes."""
    return URI_PREFIX + hashlib.sha256(data).hexdigest()


def image_dims(data: bytes) -> tuple[int, int]:
    """(width, height) of an encoded image without full decode."""
    img = Image.open(io.BytesIO(data))
    return img.size
