"""Shared builders: synthetic tabletop scenes, episodes, datasets, chains."""

from __future__ import annotations

import numpy as np
import pytest

from augforge.types import CameraModel, DepthMap, Episode, Frame, Image, Mask, MeshAsset
from augforge.rigid import RigidTransform
from augforge.geometry.kinematics import Box, Capsule, Joint, KinematicChain, save_chain
from augforge.geometry.topdown import Workspace
from augforge.dataset import DatasetManifest, save_episode, save_manifest
from augforge.meshes import save_mesh_catalog

# Overhead rig: world is z-up, table plane at z=0 spanning [0,1]x[0,1],
# camera 1 m above the table center looking straight down. Depth at the
# table plane is exactly 1.0 and the table fills a 64x64 image.
TABLE_Z = 0.0
CAM_HEIGHT = 1.0

OVERHEAD_ROTATION = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


def overhead_camera(size: int = 64) -> CameraModel:
    return CameraModel(
        fx=float(size),
        fy=float(size),
        cx=size / 2.0,
        cy=size / 2.0,
        pose=RigidTransform(OVERHEAD_ROTATION, np.array([0.5, 0.5, CAM_HEIGHT])),
    )


def default_workspace() -> Workspace:
    return Workspace(x_range=(0.0, 1.0), y_range=(0.0, 1.0), table_height=TABLE_Z,
                     topdown_resolution=0.01)


def rect_mask(size: int, x0: int, y0: int, x1: int, y1: int) -> Mask:
    bits = np.zeros((size, size), dtype=bool)
    bits[y0 : y1 + 1, x0 : x1 + 1] = True
    return Mask(bits)


def tabletop_frame(size: int = 64, with_depth: bool = True) -> tuple[Frame, Mask, Mask]:
    """A synthetic scene: red object block and blue receptacle block on gray."""
    pixels = np.full((size, size, 3), (80, 80, 80), dtype=np.uint8)
    obj = rect_mask(size, size // 8, size // 8, size // 8 + size // 6, size // 8 + size // 6)
    rec = rect_mask(size, size // 2, size // 2, size // 2 + size // 4, size // 2 + size // 4)
    pixels[obj.bits] = (200, 40, 40)
    pixels[rec.bits] = (40, 40, 200)

    depth = None
    if with_depth:
        values = np.full((size, size), 1.0)
        values[obj.bits] = 0.9  # 10 cm tall object
        values[rec.bits] = 0.97
        depth = DepthMap(values)

    frame = Frame(
        rgb=Image(pixels),
        depth=depth,
        joints=np.zeros(2),
        gripper=0.5,
        action=np.array([0.1, 0.2, 0.3, 0.4]),
    )
    return frame, obj, rec


def planar_chain(links: bool = False) -> KinematicChain:
    """Two unit links revolute about z, end effector one more unit out."""
    joint = lambda t: Joint(  # noqa: E731
        origin=RigidTransform.translate(t),
        axis=[0.0, 0.0, 1.0],
        kind="revolute",
        limits=(-np.pi, np.pi),
    )
    geometry = ()
    if links:
        geometry = (
            Capsule(radius=0.05, p0=np.zeros(3), p1=np.array([1.0, 0.0, 0.0])),
            Capsule(radius=0.05, p0=np.zeros(3), p1=np.array([1.0, 0.0, 0.0])),
        )
    return KinematicChain(
        joints=(joint([0.0, 0.0, 0.0]), joint([1.0, 0.0, 0.0])),
        end_effector_offset=RigidTransform.translate([1.0, 0.0, 0.0]),
        links=geometry,
    )


def box_asset(
    name: str,
    size=(0.12, 0.12, 0.08),
    role: str = "object",
    noun: str | None = None,
    category: str = "block",
) -> MeshAsset:
    """An axis-aligned box asset with its bottom face on z=0."""
    sx, sy, sz = size
    corners = np.array(
        [
            [-sx / 2, -sy / 2, 0.0],
            [sx / 2, -sy / 2, 0.0],
            [sx / 2, sy / 2, 0.0],
            [-sx / 2, sy / 2, 0.0],
            [-sx / 2, -sy / 2, sz],
            [sx / 2, -sy / 2, sz],
            [sx / 2, sy / 2, sz],
            [-sx / 2, sy / 2, sz],
        ]
    )
    tris = np.array(
        [
            [0, 2, 1], [0, 3, 2],
            [4, 5, 6], [4, 6, 7],
            [0, 1, 5], [0, 5, 4],
            [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6],
            [3, 0, 4], [3, 4, 7],
        ],
        dtype=np.int64,
    )
    return MeshAsset(
        vertices=corners,
        triangles=tris,
        category=category,
        prompt_noun=noun or f"a {name}",
        role_tags=frozenset({role}),
        name=name,
    )


def default_catalog() -> list[MeshAsset]:
    return [
        box_asset("cube", (0.12, 0.12, 0.08), "object", "a cube"),
        box_asset("slab", (0.16, 0.10, 0.04), "object", "a slab"),
        box_asset("tray", (0.22, 0.22, 0.05), "receptacle", "a tray"),
        box_asset("bin", (0.18, 0.18, 0.10), "receptacle", "a bin"),
        box_asset("widget", (0.06, 0.06, 0.06), "distractor", "a widget"),
        box_asset("gadget", (0.05, 0.08, 0.05), "distractor", "a gadget"),
    ]


def make_episode(eid: str = "ep-000", size: int = 64, frames: int = 2,
                 with_depth: bool = True, with_masks: bool = True) -> Episode:
    frame0, obj, rec = tabletop_frame(size, with_depth)
    frame_list = [frame0]
    for k in range(1, frames):
        frame_list.append(
            Frame(
                rgb=frame0.rgb,
                depth=frame0.depth,
                joints=np.full(2, 0.1 * k),
                gripper=0.5,
                action=np.array([0.1, 0.2, 0.3, 0.4]) + k,
            )
        )
    return Episode(
        id=eid,
        frames=tuple(frame_list),
        task_text="Put the red block in a blue tray",
        object_label="the red block",
        receptacle_label="a blue tray",
        chain_ref="arm",
        cameras={"front": overhead_camera(size)},
        primary_camera="front",
        object_mask=obj if with_masks else None,
        receptacle_mask=rec if with_masks else None,
    )


def write_dataset(root, n_episodes: int = 2, size: int = 64, frames: int = 2,
                  with_masks: bool = True, catalog: bool = True) -> list[str]:
    """Materialize a synthetic dataset on disk; returns episode ids."""
    ids = []
    entries = []
    for i in range(n_episodes):
        eid = f"ep-{i:03d}"
        episode = make_episode(eid, size=size, frames=frames, with_masks=with_masks)
        save_episode(root, episode)
        ids.append(eid)
        entries.append({"id": eid, "frames": frames})
    save_chain(root / "chains" / "arm.json", planar_chain(links=True))
    if catalog:
        save_mesh_catalog(root / "meshes", default_catalog())
    save_manifest(root, DatasetManifest(dataset_id="synthetic", episodes=entries))
    return ids


@pytest.fixture
def dataset(tmp_path):
    root = tmp_path / "dataset"
    ids = write_dataset(root)
    return root, ids
