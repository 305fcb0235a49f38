"""Software depth rendering of triangle meshes.

A pixel is covered iff its center lies inside the projected triangle, with
the top-left rule breaking exact-boundary ties; depth interpolation is
perspective-correct. No anti-aliasing and no back-face culling (scanned
assets may be open shells). Triangles crossing the near plane are clipped
so partially-behind geometry still covers its visible pixels.
"""

from __future__ import annotations

import numpy as np

from augforge import _kernels
from augforge.types import CameraModel, DepthMap, Mask, MeshAsset, Rect
from augforge.rigid import RigidTransform

NEAR_CLIP = 1e-6


def bboxes_overlap(a: Rect, b: Rect) -> bool:
    """Closed-interval intersection test; touching edges count as overlap."""
    return a.x0 <= b.x1 and b.x0 <= a.x1 and a.y0 <= b.y1 and b.y0 <= a.y1


def _clip_triangle_near(tri_cam: np.ndarray, znear: float) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of one camera-space triangle against z >= znear.

    Returns 0..2 triangles (fan-split when the clipped polygon is a quad).
    """
    poly = []
    for i in range(3):
        cur = tri_cam[i]
        nxt = tri_cam[(i + 1) % 3]
        cur_in = cur[2] >= znear
        nxt_in = nxt[2] >= znear
        if cur_in:
            poly.append(cur)
        if cur_in != nxt_in:
            t = (znear - cur[2]) / (nxt[2] - cur[2])
            inter = cur + t * (nxt - cur)
            inter[2] = znear
            poly.append(inter)
    if len(poly) < 3:
        return []
    return [np.stack([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def clip_near(verts_cam: np.ndarray, triangles: np.ndarray, znear: float = NEAR_CLIP) -> np.ndarray:
    """Clip a camera-space mesh against the near plane.

    Returns an (n, 3, 3) array of camera-space triangles, all with z >= znear.
    The all-in-front case passes through without copying geometry.
    """
    tri_verts = verts_cam[triangles]  # (m, 3, 3)
    in_front = tri_verts[:, :, 2] >= znear
    all_in = in_front.all(axis=1)
    keep = tri_verts[all_in]
    crossing = np.flatnonzero(in_front.any(axis=1) & ~all_in)
    if crossing.size == 0:
        return keep
    clipped = [keep] if keep.size else []
    for idx in crossing:
        clipped.extend(t[None] for t in _clip_triangle_near(tri_verts[idx], znear))
    if not clipped:
        return np.empty((0, 3, 3))
    return np.concatenate(clipped, axis=0)


def project_triangles(tris_cam: np.ndarray, camera: CameraModel) -> np.ndarray:
    """Map camera-space triangles to (u, v, z) pixel-space triangles."""
    out = np.empty_like(tris_cam)
    z = tris_cam[:, :, 2]
    out[:, :, 0] = camera.fx * tris_cam[:, :, 0] / z + camera.cx
    out[:, :, 1] = camera.fy * tris_cam[:, :, 1] / z + camera.cy
    out[:, :, 2] = z
    return out


def rasterize_triangles_px(tris_px: np.ndarray, width: int, height: int) -> np.ndarray:
    """Z-buffer of projected triangles; untouched pixels hold +inf."""
    zbuf = np.full((height, width), np.inf)
    if tris_px.shape[0]:
        _kernels.rasterize_into(np.ascontiguousarray(tris_px), zbuf)
    return zbuf


def render_vertices_depth(
    verts_world: np.ndarray,
    triangles: np.ndarray,
    camera: CameraModel,
    width: int,
    height: int,
) -> tuple[DepthMap, Mask]:
    """Depth-render a world-space triangle soup through a camera."""
    verts_cam = camera.pose.inverse().apply(verts_world)
    tris_cam = clip_near(verts_cam, triangles)
    if tris_cam.shape[0] == 0:
        return DepthMap(np.zeros((height, width))), Mask.empty(width, height)
    tris_px = project_triangles(tris_cam, camera)
    zbuf = rasterize_triangles_px(tris_px, width, height)
    covered = np.isfinite(zbuf)
    depth = np.where(covered, zbuf, 0.0)
    return DepthMap(depth), Mask(covered)


def render_mesh_depth(
    mesh: MeshAsset,
    pose: RigidTransform,
    camera: CameraModel,
    width: int,
    height: int,
) -> tuple[DepthMap, Mask]:
    """Render a posed mesh; the mask marks pixels with a rendered surface."""
    return render_vertices_depth(pose.apply(mesh.vertices), mesh.triangles, camera, width, height)


def composite_depth(base: DepthMap, rendered: DepthMap, mask: Mask) -> DepthMap:
    """Inside the mask take the rendered value, outside keep base, bit-exact."""
    if base.values.shape != rendered.values.shape or base.values.shape != mask.bits.shape:
        raise ValueError(
            f"dimension mismatch: base {base.values.shape}, rendered "
            f"{rendered.values.shape}, mask {mask.bits.shape}"
        )
    return DepthMap(np.where(mask.bits, rendered.values, base.values))
