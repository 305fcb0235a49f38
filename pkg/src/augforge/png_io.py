"""PNG codecs shared by dataset storage and the backend wire protocol.

Depth is stored as 16-bit grayscale millimeters (0 = invalid), quantized
round-half-up at write time; masks as 8-bit grayscale with 255 = member.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage

MAX_DEPTH_MM = 65535


def depth_m_to_mm(values: np.ndarray) -> np.ndarray:
    """Quantize meters to uint16 millimeters, round-half-up, 0 stays invalid."""
    mm = np.floor(values * 1000.0 + 0.5)
    return np.clip(mm, 0, MAX_DEPTH_MM).astype(np.uint16)


def depth_mm_to_m(mm: np.ndarray) -> np.ndarray:
    return mm.astype(np.float64) / 1000.0


def encode_rgb(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_rgb(data: bytes) -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return arr


def encode_gray8(values: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(values.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_gray8(data: bytes) -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as img:
        if img.mode != "L":
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.uint8)
    return arr


def encode_gray16(values: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(values.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


def decode_gray16(data: bytes) -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as img:
        arr = np.asarray(img)
    if arr.dtype == np.int32:  # Pillow reads some 16-bit PNGs as mode I
        arr = arr.astype(np.uint16)
    if arr.dtype != np.uint16:
        raise ValueError(f"expected 16-bit grayscale PNG, decoded dtype {arr.dtype}")
    return arr


def encode_mask(bits: np.ndarray) -> bytes:
    return encode_gray8(np.where(bits, 255, 0).astype(np.uint8))


def decode_mask(data: bytes) -> np.ndarray:
    return decode_gray8(data) != 0


def encode_depth(values_m: np.ndarray) -> bytes:
    return encode_gray16(depth_m_to_mm(values_m))


def decode_depth(data: bytes) -> np.ndarray:
    return depth_mm_to_m(decode_gray16(data))
