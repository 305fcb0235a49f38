"""Pure-numpy z-buffer triangle rasterization kernel.

Fallback for :mod:`augforge._kernels`. The arithmetic mirrors the compiled
kernel expression-for-expression so both produce bit-identical buffers:
pixel-center edge functions, top-left tie rule, perspective-correct depth
``area / (w0/az + w1/bz + w2/cz)`` and a strict-less z-buffer update.
"""

from __future__ import annotations

import math

import numpy as np


def _edge_accepts_zero(px: float, py: float, qx: float, qy: float) -> bool:
    # Top-left fill rule for the positively oriented triangle: a pixel
    # center exactly on edge p->q counts iff the edge is horizontal going
    # right (top) or strictly descending in screen y (left).
    dx = qx - px
    dy = qy - py
    return (dy == 0.0 and dx > 0.0) or dy < 0.0


def rasterize_into(tris: np.ndarray, zbuf: np.ndarray) -> None:
    """Rasterize projected triangles into a depth buffer (min-depth wins).

    ``tris`` has shape (t, 3, 3): per vertex (u, v, z) with u, v in pixel
    coordinates and z the camera-frame depth (> 0). ``zbuf`` is float64
    (h, w), initialized to +inf, updated in place.
    """
    height, width = zbuf.shape
    for t in range(tris.shape[0]):
        ax, ay, az = tris[t, 0]
        bx, by, bz = tris[t, 1]
        cx, cy, cz = tris[t, 2]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0.0:
            continue
        if area < 0.0:
            bx, by, bz, cx, cy, cz = cx, cy, cz, bx, by, bz
            area = -area

        minx = min(ax, bx, cx)
        maxx = max(ax, bx, cx)
        miny = min(ay, by, cy)
        maxy = max(ay, by, cy)
        px0 = max(0, int(math.ceil(minx - 0.5)))
        px1 = min(width - 1, int(math.floor(maxx - 0.5)))
        py0 = max(0, int(math.ceil(miny - 0.5)))
        py1 = min(height - 1, int(math.floor(maxy - 0.5)))
        if px0 > px1 or py0 > py1:
            continue

        accept0 = _edge_accepts_zero(bx, by, cx, cy)
        accept1 = _edge_accepts_zero(cx, cy, ax, ay)
        accept2 = _edge_accepts_zero(ax, ay, bx, by)

        pcy = (np.arange(py0, py1 + 1, dtype=np.float64) + 0.5)[:, None]
        pcx = (np.arange(px0, px1 + 1, dtype=np.float64) + 0.5)[None, :]

        w0 = (cx - bx) * (pcy - by) - (cy - by) * (pcx - bx)
        w1 = (ax - cx) * (pcy - cy) - (ay - cy) * (pcx - cx)
        w2 = (bx - ax) * (pcy - ay) - (by - ay) * (pcx - ax)

        cover = (
            ((w0 > 0.0) | ((w0 == 0.0) & accept0))
            & ((w1 > 0.0) | ((w1 == 0.0) & accept1))
            & ((w2 > 0.0) | ((w2 == 0.0) & accept2))
        )
        if not cover.any():
            continue

        if az == bz and bz == cz:
            depth = np.full(cover.shape, az)
        else:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                s = w0 / az + w1 / bz + w2 / cz
                depth = area / s

        sub = zbuf[py0 : py1 + 1, px0 : px1 + 1]
        np.copyto(sub, depth, where=cover & (depth < sub))
