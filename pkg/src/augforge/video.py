"""Fully automatic per-trajectory augmentation (the scalable video regime).

No manual masks or meshes: forward kinematics gives the robot's mask and
the end-effector pixel, the end-effector pixel prompts the segmentation
backend for the manipulated object's mask, the tracking backend carries it
across frames, and background edits are confined to segments that touch
neither the robot nor the object. Only RGB is edited; depth, when present,
passes through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from augforge.types import Episode, Frame, Image, Mask, union_masks
from augforge.geometry.camera import project_point
from augforge.geometry.kinematics import Box, Capsule, KinematicChain, forward_kinematics
from augforge.geometry.primitives import box_mesh, capsule_mesh
from augforge.geometry.raster import rasterize_triangles_px, clip_near, project_triangles
from augforge import backends as be

RESEED_AFTER_FALLBACKS = 3
CAPSULE_INFLATION = 1.1  # err large: protected robot pixels must stay protected


class VideoStageError(Exception):
    """A stage failed; carries the frame index for provenance."""

    def __init__(self, frame_index: int, message: str):
        super().__init__(f"frame {frame_index}: {message}")
        self.frame_index = frame_index


@dataclass(frozen=True, eq=False)
class TrajectoryMasks:
    object_masks: tuple
    robot_masks: tuple
    background_masks: tuple  # per frame: tuple of candidate masks


@dataclass(frozen=True)
class VideoPlan:
    components: frozenset  # subset of {"object_texture", "background"}
    object_prompt: str
    background_prompt: str
    seeds: dict

    def to_json(self) -> dict:
        return {
            "components": sorted(self.components),
            "object_prompt": self.object_prompt,
            "background_prompt": self.background_prompt,
            "seeds": {k: str(v) for k, v in sorted(self.seeds.items())},
        }

    @staticmethod
    def from_json(doc: dict) -> "VideoPlan":
        return VideoPlan(
            components=frozenset(doc["components"]),
            object_prompt=doc["object_prompt"],
            background_prompt=doc["background_prompt"],
            seeds={k: int(v) for k, v in doc["seeds"].items()},
        )


def end_effector_pixel(
    chain: KinematicChain, joints, camera, width: int, height: int
) -> Optional[tuple[int, int]]:
    """The end effector's pixel, or None when behind the camera or off-image."""
    fk = forward_kinematics(chain, joints)
    projected = project_point(camera, fk.end_effector.translation)
    if projected is None:
        return None
    u, v, _ = projected
    x, y = int(np.floor(u)), int(np.floor(v))
    if not (0 <= x < width and 0 <= y < height):
        return None
    return (x, y)


def robot_mask(
    chain: KinematicChain,
    joints,
    link_geometry,
    camera,
    width: int,
    height: int,
    inflate: float = CAPSULE_INFLATION,
) -> Mask:
    """Rasterize the robot's link primitives posed by forward kinematics.

    Capsule radii are inflated (default 10%) so the approximate mask errs
    on covering the real robot.
    """
    link_geometry = tuple(link_geometry)
    if len(link_geometry) != chain.num_joints:
        raise ValueError(
            f"link geometry for {len(link_geometry)} joints, chain has {chain.num_joints}"
        )
    if chain.num_joints == 0:
        return Mask.empty(width, height)

    fk = forward_kinematics(chain, joints)
    world_tris = []
    for transform, prim in zip(fk.joint_transforms, link_geometry):
        if prim is None:
            continue
        if isinstance(prim, Capsule):
            verts, tris = capsule_mesh(
                Capsule(radius=prim.radius * inflate, p0=prim.p0, p1=prim.p1)
            )
        elif isinstance(prim, Box):
            verts, tris = box_mesh(prim)
        else:
            raise ValueError(f"unknown link primitive {type(prim).__name__}")
        world = transform.apply(verts)
        cam = camera.pose.inverse().apply(world)
        clipped = clip_near(cam, tris)
        if clipped.shape[0]:
            world_tris.append(project_triangles(clipped, camera))
    if not world_tris:
        return Mask.empty(width, height)
    zbuf = rasterize_triangles_px(np.concatenate(world_tris, axis=0), width, height)
    return Mask(np.isfinite(zbuf))


def seed_object_mask(
    frame_image: Image,
    seed_pixel: tuple[int, int],
    backend,
    robot: Optional[Mask] = None,
) -> Mask:
    """Point-prompted object mask at the end-effector pixel.

    Returns the highest-score mask containing the pixel, minus any overlap
    with the robot mask; an explicit empty mask when the backend finds
    nothing at that point.
    """
    x, y = seed_pixel
    results = be.segment(backend, be.SegmentRequest(image=frame_image, point=(x, y)))
    containing = [(mask, score) for mask, score in results if mask.bits[y, x]]
    if not containing:
        return Mask.empty(frame_image.width, frame_image.height)
    best = containing[0][0]
    if robot is not None:
        return Mask(best.bits & ~robot.bits)
    return best


def track_object(
    images: list[Image],
    initial: Mask,
    backend,
    reseed: Optional[Callable[[int], Optional[Mask]]] = None,
    events: Optional[list] = None,
) -> list[Mask]:
    """Propagate a frame-0 mask across a trajectory.

    Each step tracks from the previous frame. When the tracker returns the
    unchanged previous mask (its loss fallback) three frames in a row, the
    mask is re-seeded at that frame via the ``reseed`` callback and the
    event is recorded.
    """
    masks = [initial]
    consecutive_fallbacks = 0
    for t in range(1, len(images)):
        tracked = be.track(
            backend,
            be.TrackRequest(
                prev_image=images[t - 1], next_image=images[t], prev_mask=masks[-1]
            ),
        )
        if np.array_equal(tracked.bits, masks[-1].bits):
            consecutive_fallbacks += 1
        else:
            consecutive_fallbacks = 0
        if consecutive_fallbacks >= RESEED_AFTER_FALLBACKS and reseed is not None:
            fresh = reseed(t)
            if fresh is not None and not fresh.is_empty():
                tracked = fresh
            if events is not None:
                events.append(f"re-seeded object mask at frame {t}")
            consecutive_fallbacks = 0
        masks.append(tracked)
    return masks


def background_candidates(
    frame_image: Image, robot: Mask, obj: Mask, backend
) -> list[Mask]:
    """Segments that intersect neither the robot nor the manipulated object."""
    if robot.bits.shape != obj.bits.shape or robot.bits.shape != frame_image.pixels.shape[:2]:
        raise ValueError("mask dimensions must match the frame")
    blocked = robot.bits | obj.bits
    results = be.segment(backend, be.SegmentRequest(image=frame_image, point=None))
    return [mask for mask, _ in results if not (mask.bits & blocked).any()]


def aggregate_masks(masks: list[Mask]) -> Mask:
    """Pixel-wise union of equally sized masks."""
    if not masks:
        raise ValueError("cannot aggregate an empty mask list")
    h, w = masks[0].bits.shape
    return union_masks(masks, w, h)


@dataclass(frozen=True)
class VideoContext:
    """Per-episode inputs the video regime needs beyond the episode itself."""

    chain: KinematicChain
    inpaint_backend: object
    segment_backend: object
    track_backend: object


def _augment_view(
    images: list[Image],
    camera,
    episode: Episode,
    plan: VideoPlan,
    ctx: VideoContext,
    view_tag: str,
    events: list,
) -> list[Image]:
    n = len(images)
    width, height = images[0].width, images[0].height
    link_geometry = ctx.chain.links if ctx.chain.links else (None,) * ctx.chain.num_joints

    robot_masks = []
    for t in range(n):
        robot_masks.append(
            robot_mask(ctx.chain, episode.frames[t].joints, link_geometry, camera, width, height)
        )

    want_object = "object_texture" in plan.components
    want_background = "background" in plan.components

    object_masks = [Mask.empty(width, height)] * n
    if want_object or want_background:
        pixel = end_effector_pixel(
            ctx.chain, episode.frames[0].joints, camera, width, height
        )
        if pixel is None:
            raise VideoStageError(0, f"end effector not visible in view {view_tag!r}")
        initial = seed_object_mask(images[0], pixel, ctx.segment_backend, robot_masks[0])
        if initial.is_empty() and want_object:
            raise VideoStageError(
                0, f"no object mask at end-effector pixel {pixel} in view {view_tag!r}"
            )

        def reseed(t: int) -> Optional[Mask]:
            px = end_effector_pixel(
                ctx.chain, episode.frames[t].joints, camera, width, height
            )
            if px is None:
                return None
            return seed_object_mask(images[t], px, ctx.segment_backend, robot_masks[t])

        object_masks = track_object(
            images, initial, ctx.track_backend, reseed=reseed, events=events
        )

    out = []
    for t in range(n):
        img = images[t]
        obj_bits = object_masks[t].bits & ~robot_masks[t].bits
        if want_object and obj_bits.any():
            img = be.inpaint(
                ctx.inpaint_backend,
                be.InpaintRequest(
                    image=img,
                    mask=Mask(obj_bits),
                    prompt=plan.object_prompt,
                    seed=plan.seeds["object"],
                    mode="inpaint",
                ),
            )
        if want_background:
            candidates = background_candidates(
                images[t], robot_masks[t], Mask(object_masks[t].bits), ctx.segment_backend
            )
            if candidates:
                region = aggregate_masks(candidates)
                img = be.inpaint(
                    ctx.inpaint_backend,
                    be.InpaintRequest(
                        image=img,
                        mask=region,
                        prompt=plan.background_prompt,
                        seed=plan.seeds[f"background/{view_tag}/{t}"],
                        mode="inpaint",
                    ),
                )
        out.append(img)
    return out


def augment_trajectory(
    episode: Episode, plan: VideoPlan, ctx: VideoContext
) -> tuple[Episode, list[str]]:
    """Augment every frame of a trajectory.

    The object keeps one prompt and one seed across the whole trajectory
    (temporal appearance consistency); background edits draw a fresh
    sub-seed per frame. Robot pixels are never edited; actions, joints and
    gripper values pass through untouched. Each named camera view is
    augmented independently.
    """
    events: list[str] = []
    views = {episode.primary_camera: [f.rgb for f in episode.frames]}
    for name in episode.cameras:
        if name == episode.primary_camera:
            continue
        views[name] = [f.extra_views[name] for f in episode.frames]

    augmented_views: dict[str, list[Image]] = {}
    for name, images in views.items():
        augmented_views[name] = _augment_view(
            images, episode.cameras[name], episode, plan, ctx, name, events
        )

    new_frames = []
    for t, frame in enumerate(episode.frames):
        extra = {
            name: augmented_views[name][t]
            for name in views
            if name != episode.primary_camera
        }
        new_frames.append(
            replace(
                frame,
                rgb=augmented_views[episode.primary_camera][t],
                extra_views=extra,
            )
        )
    return replace(episode, frames=tuple(new_frames)), events
