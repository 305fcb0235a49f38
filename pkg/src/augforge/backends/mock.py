"""Deterministic procedural backend used for tests and desk-scale runs.

Every operation is pure integer arithmetic on top of FNV-1a hashing, so
identical requests produce identical output bytes on any platform.

Inpainting fills the masked region with a constant color taken from bytes
0-2 (little-endian) of FNV-1a-64(prompt) XOR seed, darkened by 32 where
(x + y) is even so filled regions are detectably non-constant. In
depth-guided mode the fill is additionally scaled by normalized depth
(nearer is brighter), so depth actually influences the output.

Segmentation returns 4-connected components of pixels that differ from the
most frequent image color; tracking returns the component with the highest
IoU against the previous mask, falling back to the previous mask when the
best IoU drops below 0.1.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from augforge import png_io
from augforge.seeding import fnv1a64
from augforge.types import Image, Mask
from augforge.backends.base import (
    MODE_DEPTH_GUIDED,
    InpaintRequest,
    SegmentRequest,
    TrackRequest,
)

MOCK_NAME = "augforge-mock"
MOCK_VERSION = "1"
TRACK_IOU_FLOOR = 0.1

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def fill_color(prompt: str, seed: int) -> tuple[int, int, int]:
    h = fnv1a64(prompt.encode("utf-8")) ^ (seed & ((1 << 64) - 1))
    return (h & 0xFF, (h >> 8) & 0xFF, (h >> 16) & 0xFF)


def _dominant_color(pixels: np.ndarray) -> np.ndarray:
    flat = pixels.reshape(-1, 3)
    colors, counts = np.unique(flat, axis=0, return_counts=True)
    # np.unique sorts lexicographically, so ties resolve to the smallest triple
    return colors[int(np.argmax(counts))]


def _components(pixels: np.ndarray) -> list[np.ndarray]:
    """Connected components of non-background pixels, in deterministic order.

    Components are sorted by descending size, then by first pixel in
    row-major scan order.
    """
    background = _dominant_color(pixels)
    fg = (pixels != background).any(axis=2)
    labels, n = ndimage.label(fg, structure=_FOUR_CONNECTED)
    comps = []
    flat = labels.ravel()
    for lbl in range(1, n + 1):
        bits = labels == lbl
        first = int(np.argmax(flat == lbl))
        comps.append((int(bits.sum()), first, bits))
    comps.sort(key=lambda t: (-t[0], t[1]))
    return [bits for _, _, bits in comps]


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


class MockBackend:
    def health(self) -> dict:
        return {
            "name": MOCK_NAME,
            "version": MOCK_VERSION,
            "modes": ["inpaint", "depth_guided", "segment", "track"],
            "deterministic": True,
        }

    def inpaint(self, req: InpaintRequest) -> Image:
        out = req.image.pixels.copy()
        box = req.mask.bbox()
        if box is None:
            return Image(out)
        # all work happens inside the mask's bounding box
        region = req.mask.bits[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1]
        h, w = region.shape

        r, g, b = fill_color(req.prompt, req.seed)
        base = np.array([r, g, b], dtype=np.uint16)
        filled = np.empty((h, w, 3), dtype=np.uint16)
        filled[:] = base

        if req.mode == MODE_DEPTH_GUIDED:
            depth_crop = req.depth.values[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1]
            mm = png_io.depth_m_to_mm(depth_crop).astype(np.int64)
            valid = (mm > 0) & region
            # brightness factor in [128, 255]/256: nearest depth brightest,
            # invalid pixels sit at the dim end, flat regions mid-range
            factor = np.full((h, w), 128, dtype=np.int64)
            if valid.any():
                dmin = int(mm[valid].min())
                dmax = int(mm[valid].max())
                if dmax > dmin:
                    factor_valid = 128 + (127 * (dmax - mm)) // (dmax - dmin)
                else:
                    factor_valid = np.full((h, w), 192, dtype=np.int64)
                factor = np.where(valid, factor_valid, factor)
            filled = (filled * factor[..., None]) >> 8

        # stipple parity uses absolute pixel coordinates
        yy, xx = np.meshgrid(
            np.arange(box.y0, box.y1 + 1), np.arange(box.x0, box.x1 + 1), indexing="ij"
        )
        stipple = ((xx + yy) % 2 == 0) & region
        filled = filled.astype(np.int16)
        filled[stipple] = np.maximum(filled[stipple] - 32, 0)

        crop = out[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1]
        crop[region] = filled[region].astype(np.uint8)
        return Image(out)

    def segment(self, req: SegmentRequest) -> list[tuple[Mask, float]]:
        comps = _components(req.image.pixels)
        if req.point is not None:
            x, y = req.point
            for bits in comps:
                if bits[y, x]:
                    return [(Mask(bits), 1.0)]
            return []
        total = req.image.width * req.image.height
        return [(Mask(bits), np.count_nonzero(bits) / total) for bits in comps]

    def track(self, req: TrackRequest) -> Mask:
        comps = _components(req.next_image.pixels)
        best_iou = 0.0
        best = None
        for bits in comps:
            iou = mask_iou(bits, req.prev_mask.bits)
            if iou > best_iou:
                best_iou = iou
                best = bits
        if best is None or best_iou < TRACK_IOU_FLOOR:
            return Mask(req.prev_mask.bits.copy())
        return Mask(best)
