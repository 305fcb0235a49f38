"""Orthographic top-down reprojection of RGBD observations.

Back-projects every valid depth pixel to world coordinates and splats it
onto a regular grid over the workspace; the maximum height wins per cell
(heightmaps for grasping care about top surfaces). Untouched heightmap
cells hold NaN.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from augforge.types import CameraModel, DepthMap, Image
from augforge.geometry.camera import back_project_grid

HEIGHT_SENTINEL = np.nan


@dataclass(frozen=True)
class Workspace:
    """Table workspace: world x/y extent, table plane height, grid resolution."""

    x_range: tuple
    y_range: tuple
    table_height: float
    topdown_resolution: float

    def __post_init__(self):
        if not (self.x_range[1] > self.x_range[0] and self.y_range[1] > self.y_range[0]):
            raise ValueError("workspace ranges must be non-degenerate")
        if self.topdown_resolution <= 0:
            raise ValueError("resolution must be positive")

    def grid_shape(self) -> tuple[int, int]:
        """(height, width) of the top-down grid; rows map to y, columns to x."""
        w = int(round((self.x_range[1] - self.x_range[0]) / self.topdown_resolution))
        h = int(round((self.y_range[1] - self.y_range[0]) / self.topdown_resolution))
        return max(h, 1), max(w, 1)


def project_topdown(
    rgb: Image, depth: DepthMap, camera: CameraModel, ws: Workspace
) -> tuple[Image, np.ndarray]:
    """Splat an RGBD frame onto the workspace grid.

    Returns the top-down color image and a float64 heightmap of height
    above the table plane (NaN where no point landed). Ties on height are
    broken toward the earlier source pixel in row-major order.
    """
    if rgb.pixels.shape[:2] != depth.values.shape:
        raise ValueError(
            f"rgb {rgb.pixels.shape[:2]} and depth {depth.values.shape} differ"
        )
    grid_h, grid_w = ws.grid_shape()
    top = np.zeros((grid_h, grid_w, 3), dtype=np.uint8)
    heights = np.full((grid_h, grid_w), HEIGHT_SENTINEL)

    valid = depth.valid()
    if valid.any():
        world = back_project_grid(camera, depth.values)[valid]
        colors = rgb.pixels[valid]
        ci = np.floor((world[:, 0] - ws.x_range[0]) / ws.topdown_resolution).astype(np.int64)
        rj = np.floor((world[:, 1] - ws.y_range[0]) / ws.topdown_resolution).astype(np.int64)
        inside = (ci >= 0) & (ci < grid_w) & (rj >= 0) & (rj < grid_h)
        if inside.any():
            ci, rj = ci[inside], rj[inside]
            h = world[inside, 2] - ws.table_height
            colors = colors[inside]
            src = np.arange(h.size)
            # Sort ascending by height with descending source index as the
            # tiebreak, then let later writes win: per cell the result is
            # the max height, ties resolved to the smallest source index.
            order = np.lexsort((-src, h))
            cells = rj[order] * grid_w + ci[order]
            rev = cells[::-1]
            _, first_in_rev = np.unique(rev, return_index=True)
            winners = order[cells.size - 1 - first_in_rev]
            heights[rj[winners], ci[winners]] = h[winners]
            top[rj[winners], ci[winners]] = colors[winners]

    if np.isnan(heights).all():
        warnings.warn("top-down projection produced no covered cells", stacklevel=2)
    return Image(top), heights


def topdown_pixel_to_world(px, heightmap: np.ndarray, ws: Workspace) -> np.ndarray:
    """Map a top-down grid pixel (x, y) to world coordinates at its cell center."""
    x, y = int(px[0]), int(px[1])
    grid_h, grid_w = heightmap.shape
    if not (0 <= x < grid_w and 0 <= y < grid_h):
        raise ValueError(f"pixel ({x}, {y}) outside {grid_w}x{grid_h} grid")
    h = heightmap[y, x]
    if np.isnan(h):
        raise ValueError(f"pixel ({x}, {y}) has no valid height")
    wx = ws.x_range[0] + (x + 0.5) * ws.topdown_resolution
    wy = ws.y_range[0] + (y + 0.5) * ws.topdown_resolution
    return np.array([wx, wy, ws.table_height + h])
