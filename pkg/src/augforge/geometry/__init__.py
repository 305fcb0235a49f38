"""Geometry: transforms, forward kinematics, projection, depth rendering."""

from augforge.rigid import RigidTransform, rotation_about_axis
from augforge.geometry.kinematics import (
    Box,
    Capsule,
    FKResult,
    Joint,
    KinematicChain,
    forward_kinematics,
    load_chain,
    save_chain,
)
from augforge.geometry.camera import back_project, back_project_grid, project_point
from augforge.geometry.raster import (
    bboxes_overlap,
    composite_depth,
    render_mesh_depth,
    render_vertices_depth,
)
from augforge.geometry.topdown import Workspace, project_topdown, topdown_pixel_to_world

__all__ = [
    "RigidTransform",
    "rotation_about_axis",
    "Box",
    "Capsule",
    "FKResult",
    "Joint",
    "KinematicChain",
    "forward_kinematics",
    "load_chain",
    "save_chain",
    "back_project",
    "back_project_grid",
    "project_point",
    "bboxes_overlap",
    "composite_depth",
    "render_mesh_depth",
    "render_vertices_depth",
    "Workspace",
    "project_topdown",
    "topdown_pixel_to_world",
]
