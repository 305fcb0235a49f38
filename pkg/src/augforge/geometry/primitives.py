"""Triangulated link primitives (capsules, boxes) for robot-mask rendering."""

from __future__ import annotations

import numpy as np

from augforge.geometry.kinematics import Box, Capsule

CAPSULE_SEGMENTS = 16  # 8 * segments = 128 triangles, the per-capsule budget


def _axis_frame(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = np.linalg.norm(direction)
    w = direction / n if n > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(w, helper)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return u, v, w


def capsule_mesh(capsule: Capsule, segments: int = CAPSULE_SEGMENTS) -> tuple[np.ndarray, np.ndarray]:
    """Tessellate a capsule into exactly 8 * segments triangles.

    Ring radii are scaled by (1 + sec(pi/n)) / 2 azimuthally and the cap
    profile by 2 / (1 + cos(22.5 deg)) radially, splitting the difference
    between inscribed and circumscribed polygons so the projected
    silhouette straddles the true surface instead of always undershooting.
    """
    u, v, w = _axis_frame(capsule.p1 - capsule.p0)
    r = capsule.radius * (1.0 + 1.0 / np.cos(np.pi / segments)) / 2.0
    polar = 2.0 / (1.0 + np.cos(np.pi / 8.0))  # 45-degree polar chords
    theta = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    ring_dirs = np.outer(np.cos(theta), u) + np.outer(np.sin(theta), v)  # (n, 3)

    half = np.sqrt(0.5)  # sin/cos of the 45-degree hemisphere ring
    rings = [
        capsule.p0 + (ring_dirs * (r * half) - w * (r * half)) * polar,  # lower mid
        capsule.p0 + ring_dirs * r,  # lower equator
        capsule.p1 + ring_dirs * r,  # upper equator
        capsule.p1 + (ring_dirs * (r * half) + w * (r * half)) * polar,  # upper mid
    ]
    bottom_apex = capsule.p0 - w * (r * polar)
    top_apex = capsule.p1 + w * (r * polar)

    verts = np.concatenate([np.stack(rings).reshape(-1, 3), [bottom_apex, top_apex]])
    n = segments
    i_bottom_apex = 4 * n
    i_top_apex = 4 * n + 1

    tris = []
    for k in range(n):
        k2 = (k + 1) % n
        tris.append([i_bottom_apex, k2, k])  # bottom fan to lower mid ring
        tris.append([i_top_apex, 3 * n + k, 3 * n + k2])  # top fan
        for ring in range(3):  # bands: mid->equator, equator->equator, equator->mid
            a0 = ring * n + k
            a1 = ring * n + k2
            b0 = (ring + 1) * n + k
            b1 = (ring + 1) * n + k2
            tris.append([a0, a1, b1])
            tris.append([a0, b1, b0])
    return verts, np.asarray(tris, dtype=np.int64)


_BOX_CORNERS = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=np.float64,
)

_BOX_TRIS = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # bottom
        [4, 5, 6], [4, 6, 7],  # top
        [0, 1, 5], [0, 5, 4],
        [1, 2, 6], [1, 6, 5],
        [2, 3, 7], [2, 7, 6],
        [3, 0, 4], [3, 4, 7],
    ],
    dtype=np.int64,
)


def box_mesh(box: Box) -> tuple[np.ndarray, np.ndarray]:
    verts = box.pose.apply(_BOX_CORNERS * box.half_extents)
    return verts, _BOX_TRIS.copy()
