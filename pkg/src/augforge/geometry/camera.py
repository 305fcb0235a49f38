"""Pinhole projection and back-projection."""

from __future__ import annotations

from typing import Optional

import numpy as np

from augforge.types import CameraModel

NEAR_PLANE = 1e-9


def project_point(camera: CameraModel, point) -> Optional[tuple[float, float, float]]:
    """Project a world point; returns (u, v, depth) or None when not visible.

    A point at or behind the camera plane (camera-frame z <= 1e-9) is not
    visible. No image-bounds check is applied here.
    """
    p_cam = camera.pose.inverse().apply(np.asarray(point, dtype=np.float64))
    z = float(p_cam[2])
    if z <= NEAR_PLANE:
        return None
    u = camera.fx * float(p_cam[0]) / z + camera.cx
    v = camera.fy * float(p_cam[1]) / z + camera.cy
    return (u, v, z)


def back_project(camera: CameraModel, u: float, v: float, depth: float) -> np.ndarray:
    """Inverse of project_point: pixel coordinates + depth to a world point."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    x = (u - camera.cx) / camera.fx * depth
    y = (v - camera.cy) / camera.fy * depth
    return camera.pose.apply(np.array([x, y, depth]))


def back_project_grid(camera: CameraModel, depth_values: np.ndarray) -> np.ndarray:
    """Back-project every pixel center of a depth image to world coordinates.

    Returns an (h, w, 3) array; rows with invalid depth are meaningless and
    must be filtered by the caller.
    """
    h, w = depth_values.shape
    us = np.arange(w, dtype=np.float64) + 0.5
    vs = np.arange(h, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(us, vs)
    z = depth_values
    x = (uu - camera.cx) / camera.fx * z
    y = (vv - camera.cy) / camera.fy * z
    cam_pts = np.stack([x, y, z], axis=-1)
    return camera.pose.apply(cam_pts.reshape(-1, 3)).reshape(h, w, 3)
