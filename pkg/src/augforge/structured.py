"""Structure-aware RGBD augmentation (the low-data, mask-annotated regime).

Operates on the annotated observation frame (frame 0) of an episode:
texture swaps keep geometry fixed via depth-guided inpainting; category
swaps render a replacement mesh and update the depth map so RGB and depth
stay consistent; distractors are placed on the table with image-space
bounding-box collision rejection; the background is inpainted around the
protected regions; the task description is rewritten when labels change.

Actions, joints, and gripper payloads are never touched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from augforge.seeding import derive_seed, seeded_index, split_seed, unit_float
from augforge.types import (
    DepthMap,
    Episode,
    Frame,
    Image,
    Mask,
    MeshAsset,
    dilate_mask,
    union_masks,
)
from augforge.geometry.camera import back_project, project_point
from augforge.geometry.raster import bboxes_overlap, composite_depth, render_vertices_depth
from augforge.geometry.topdown import Workspace
from augforge.rigid import rotation_about_axis
from augforge import backends as be

COMPONENTS = (
    "table_background",
    "object_texture",
    "object_shape",
    "distractors",
    "receptacle_texture",
    "receptacle_shape",
)

EDIT_DILATION_PX = 2  # hides inpainting seams; enlarges the declared edit region
DISTRACTOR_RETRY_BUDGET = 20
MAX_PLAN_ATTEMPTS = 64
FIT_JITTER_RANGE = (0.8, 1.2)  # stays inside the +-25% footprint band


class AugmentationError(Exception):
    pass


class PlanningError(AugmentationError):
    pass


class PlacementError(AugmentationError):
    pass


class BackfillError(AugmentationError):
    pass


# -- prompts ---------------------------------------------------------------


@dataclass(frozen=True)
class PromptGrammar:
    """Color/material/noun prompt templates.

    Ships with the exemplar colors red/orange/yellow and materials
    glass/marble/wood; both lists are configurable.
    """

    colors: tuple = ("red", "orange", "yellow")
    materials: tuple = ("glass", "marble", "wood")
    template: str = "a {color} {material} {noun}"

    def __post_init__(self):
        if not self.colors or not self.materials:
            raise ValueError("grammar lists must be non-empty")
        if "{noun}" not in self.template:
            raise ValueError("template must contain the {noun} slot")
        object.__setattr__(self, "colors", tuple(self.colors))
        object.__setattr__(self, "materials", tuple(self.materials))


def sample_prompt(grammar: PromptGrammar, noun: str, seed: int) -> str:
    """Deterministic prompt: color and material picked from split sub-seeds."""
    color = grammar.colors[seeded_index(split_seed(seed, "color"), len(grammar.colors))]
    material = grammar.materials[
        seeded_index(split_seed(seed, "material"), len(grammar.materials))
    ]
    return grammar.template.format(color=color, material=material, noun=noun)


# -- plans -----------------------------------------------------------------


@dataclass(frozen=True)
class AugmentationPlan:
    """Which scene components change, with prompts and per-stage seeds."""

    components: frozenset
    object_prompt: str
    receptacle_prompt: str
    background_prompt: str
    seeds: dict
    replacement_object: Optional[str] = None
    replacement_receptacle: Optional[str] = None
    distractor_count: int = 0

    def __post_init__(self):
        unknown = frozenset(self.components) - frozenset(COMPONENTS)
        if unknown:
            raise ValueError(f"unknown components {sorted(unknown)}")
        if "object_shape" in self.components and not self.replacement_object:
            raise ValueError("object_shape requires a replacement mesh ref")
        if "receptacle_shape" in self.components and not self.replacement_receptacle:
            raise ValueError("receptacle_shape requires a replacement mesh ref")
        if self.distractor_count < 0:
            raise ValueError("distractor_count must be >= 0")
        object.__setattr__(self, "components", frozenset(self.components))

    def to_json(self) -> dict:
        return {
            "components": sorted(self.components),
            "object_prompt": self.object_prompt,
            "receptacle_prompt": self.receptacle_prompt,
            "background_prompt": self.background_prompt,
            "replacement_object": self.replacement_object,
            "replacement_receptacle": self.replacement_receptacle,
            "distractor_count": self.distractor_count,
            "seeds": {k: str(v) for k, v in sorted(self.seeds.items())},
        }

    @staticmethod
    def from_json(doc: dict) -> "AugmentationPlan":
        return AugmentationPlan(
            components=frozenset(doc["components"]),
            object_prompt=doc["object_prompt"],
            receptacle_prompt=doc["receptacle_prompt"],
            background_prompt=doc["background_prompt"],
            replacement_object=doc.get("replacement_object"),
            replacement_receptacle=doc.get("replacement_receptacle"),
            distractor_count=doc.get("distractor_count", 0),
            seeds={k: int(v) for k, v in doc["seeds"].items()},
        )


@dataclass(frozen=True)
class StructuredConfig:
    """Runtime configuration for the structured regime."""

    probabilities: dict
    workspace: Workspace
    catalog: tuple = ()
    grammar: PromptGrammar = field(default_factory=PromptGrammar)
    background_nouns: tuple = ("table",)
    max_distractors: int = 3
    edit_dilation_px: int = EDIT_DILATION_PX
    distractor_retry_budget: int = DISTRACTOR_RETRY_BUDGET

    def __post_init__(self):
        for name, p in self.probabilities.items():
            if name not in COMPONENTS:
                raise ValueError(f"unknown component {name!r}")
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability for {name!r} outside [0, 1]: {p}")
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "background_nouns", tuple(self.background_nouns))

    def assets_with_role(self, role: str) -> list[MeshAsset]:
        return [a for a in self.catalog if role in a.role_tags]


def plan_augmentation(
    config: StructuredConfig, episode: Episode, aug_index: int, global_seed: int
) -> AugmentationPlan:
    """Sample which components change for one augmented copy of an episode.

    Each component is included independently with its configured
    probability; an empty selection is resampled (up to 64 attempts, so
    all-zero probabilities fail loudly rather than looping).
    """
    if episode.object_mask is None or episode.receptacle_mask is None:
        raise PlanningError(f"episode {episode.id!r} is missing object/receptacle masks")
    if not episode.object_label or not episode.receptacle_label:
        raise PlanningError(f"episode {episode.id!r} is missing object/receptacle labels")

    selected: set = set()
    for attempt in range(MAX_PLAN_ATTEMPTS):
        for comp in COMPONENTS:
            p = config.probabilities.get(comp, 0.0)
            threshold = int(p * 2.0**64)
            draw = derive_seed(global_seed, episode.id, aug_index, 0, f"plan/{attempt}/{comp}")
            if draw < threshold:
                selected.add(comp)
        if selected:
            break
    else:
        raise PlanningError(f"empty plan unreachable after {MAX_PLAN_ATTEMPTS} attempts")

    seeds = {
        comp: derive_seed(global_seed, episode.id, aug_index, 0, f"seed/{comp}")
        for comp in COMPONENTS
    }
    for tag in ("prompt/object", "prompt/receptacle", "prompt/background",
                "asset/object", "asset/receptacle"):
        seeds[tag] = derive_seed(global_seed, episode.id, aug_index, 0, tag)

    def pick_asset(role: str, tag: str) -> str:
        pool = config.assets_with_role(role)
        if not pool:
            raise PlanningError(f"catalog has no assets with role {role!r}")
        return pool[seeded_index(seeds[tag], len(pool))].name

    replacement_object = (
        pick_asset("object", "asset/object") if "object_shape" in selected else None
    )
    replacement_receptacle = (
        pick_asset("receptacle", "asset/receptacle")
        if "receptacle_shape" in selected
        else None
    )

    by_name = {a.name: a for a in config.catalog}
    object_noun = (
        by_name[replacement_object].prompt_noun if replacement_object else episode.object_label
    )
    receptacle_noun = (
        by_name[replacement_receptacle].prompt_noun
        if replacement_receptacle
        else episode.receptacle_label
    )
    background_noun = config.background_nouns[
        seeded_index(split_seed(seeds["prompt/background"], "noun"), len(config.background_nouns))
    ]

    if "distractors" in selected and config.max_distractors > 0:
        count = 1 + seeded_index(split_seed(seeds["distractors"], "count"), config.max_distractors)
    else:
        count = 0

    return AugmentationPlan(
        components=frozenset(selected),
        object_prompt=sample_prompt(config.grammar, object_noun, seeds["prompt/object"]),
        receptacle_prompt=sample_prompt(
            config.grammar, receptacle_noun, seeds["prompt/receptacle"]
        ),
        background_prompt=sample_prompt(
            config.grammar, background_noun, seeds["prompt/background"]
        ),
        replacement_object=replacement_object,
        replacement_receptacle=replacement_receptacle,
        distractor_count=count,
        seeds=seeds,
    )


# -- depth backfill ----------------------------------------------------------


def backfill_depth(depth: DepthMap, region: Mask) -> DepthMap:
    """Fill the region's depth from surrounding valid pixels.

    Each region pixel takes the average of the nearest valid values along
    the four axis directions (table plane completion behind a removed
    object). Pixels with no axis-aligned source fall back to the global
    median of source depths.
    """
    if region.is_empty():
        return DepthMap(depth.values.copy())
    values = depth.values
    sources = (values > 0.0) & ~region.bits
    if not sources.any():
        raise BackfillError("backfill impossible: no valid depth outside the region")

    def directional(vals: np.ndarray, src: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # nearest source value at-or-before each column, per row
        idx = np.where(src, np.arange(vals.shape[1])[None, :], -1)
        run = np.maximum.accumulate(idx, axis=1)
        found = run >= 0
        gathered = np.take_along_axis(vals, np.clip(run, 0, None), axis=1)
        return gathered, found

    # scan only the rows/columns that intersect the region
    rows = np.flatnonzero(region.bits.any(axis=1))
    cols = np.flatnonzero(region.bits.any(axis=0))
    lv, lf = directional(values[rows], sources[rows])
    rv, rf = directional(values[rows, ::-1], sources[rows, ::-1])
    rv, rf = rv[:, ::-1], rf[:, ::-1]
    uv, uf = directional(values[:, cols].T, sources[:, cols].T)
    dv, df = directional(values[::-1, cols].T, sources[::-1, cols].T)

    ys, xs = np.nonzero(region.bits)
    ri = np.searchsorted(rows, ys)
    ci = np.searchsorted(cols, xs)
    h = values.shape[0]
    pairs = (
        (lv[ri, xs], lf[ri, xs]),
        (rv[ri, xs], rf[ri, xs]),
        (uv[ci, ys], uf[ci, ys]),
        (dv[ci, h - 1 - ys], df[ci, h - 1 - ys]),
    )
    total = np.zeros(ys.size)
    count = np.zeros(ys.size)
    for v, f in pairs:
        total += np.where(f, v, 0.0)
        count += f

    fill = total / np.maximum(count, 1)
    missing = count == 0
    if missing.any():
        fill[missing] = np.median(values[sources])
    out = values.copy()
    out[ys, xs] = fill
    return DepthMap(out)


# -- mesh placement ----------------------------------------------------------


def _yaw_vertices(vertices: np.ndarray, yaw: float) -> np.ndarray:
    if yaw == 0.0:
        return vertices
    return vertices @ rotation_about_axis([0.0, 0.0, 1.0], yaw).T


def place_mesh_vertices(
    asset: MeshAsset, anchor_world: np.ndarray, scale: float, yaw: float = 0.0
) -> np.ndarray:
    """World vertices with the bounding-box bottom center at ``anchor_world``."""
    v = _yaw_vertices(asset.vertices, yaw)
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    bottom_center = np.array([(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, lo[2]])
    return (v - bottom_center) * scale + anchor_world


def _projected_width_px(verts_world: np.ndarray, camera) -> float:
    cam = camera.pose.inverse().apply(verts_world)
    if (cam[:, 2] <= 1e-9).any():
        raise PlacementError("replacement mesh crosses the camera plane")
    us = camera.fx * cam[:, 0] / cam[:, 2] + camera.cx
    return float(us.max() - us.min())


def _mask_anchor_world(depth: DepthMap, mask: Mask, camera) -> np.ndarray:
    """Back-project the mask bbox's bottom-center pixel through the depth map."""
    box = mask.bbox()
    if box is None:
        raise PlacementError("mask is empty")
    px = (box.x0 + box.x1) // 2
    py = box.y1
    d = float(depth.values[py, px])
    if d <= 0.0:
        inside = mask.bits & (depth.values > 0.0)
        if not inside.any():
            raise PlacementError("no valid depth under the object mask")
        d = float(np.median(depth.values[inside]))
    return back_project(camera, px + 0.5, py + 0.5, d)


def fit_replacement(
    asset: MeshAsset, old_mask: Mask, depth: DepthMap, camera, seed: int
) -> np.ndarray:
    """Pose a replacement mesh over the old object's footprint.

    The mesh bottom center lands on the back-projected bottom-center of the
    old mask's bbox; the scale is solved (two projection passes) so the
    projected width matches the old bbox width times a seeded jitter in
    [0.8, 1.2].
    """
    box = old_mask.bbox()
    if box is None:
        raise PlacementError("old mask is empty")
    anchor = _mask_anchor_world(depth, old_mask, camera)
    lo, hi = FIT_JITTER_RANGE
    jitter = lo + (hi - lo) * unit_float(split_seed(seed, "fit"))
    target = box.width * jitter

    scale = 1.0
    for _ in range(2):
        width = _projected_width_px(place_mesh_vertices(asset, anchor, scale), camera)
        if width <= 0.0:
            raise PlacementError("replacement mesh projects to zero width")
        scale *= target / width
    return place_mesh_vertices(asset, anchor, scale)


# -- augmenters --------------------------------------------------------------


def augment_in_category(
    frame: Frame,
    mask: Mask,
    prompt: str,
    seed: int,
    backend,
    dilation_px: int = EDIT_DILATION_PX,
) -> Frame:
    """Swap the masked object's appearance; geometry and depth stay fixed."""
    if mask.is_empty():
        raise AugmentationError("in-category augmentation needs a non-empty mask")
    if frame.depth is None:
        raise AugmentationError("in-category augmentation needs a depth map")
    edit = dilate_mask(mask, dilation_px)
    rgb = be.inpaint(
        backend,
        be.InpaintRequest(
            image=frame.rgb,
            mask=edit,
            prompt=prompt,
            seed=seed,
            mode="depth_guided",
            depth=frame.depth,
        ),
    )
    return replace(frame, rgb=rgb)


def augment_cross_category(
    frame: Frame,
    old_mask: Mask,
    asset: MeshAsset,
    prompt: str,
    seed: int,
    camera,
    backend,
    dilation_px: int = EDIT_DILATION_PX,
) -> tuple[Frame, Mask]:
    """Replace the masked object with a mesh from another category.

    The old footprint's depth is backfilled (table completion), the new
    mesh is depth-rendered with the original camera, and RGB is inpainted
    over the union of old and new regions guided by the updated depth.
    """
    if frame.depth is None:
        raise AugmentationError("cross-category augmentation needs a depth map")
    if old_mask.is_empty():
        raise AugmentationError("cross-category augmentation needs a non-empty mask")
    h, w = frame.depth.values.shape

    verts = fit_replacement(asset, old_mask, frame.depth, camera, seed)
    rendered_depth, rendered_mask = render_vertices_depth(
        verts, asset.triangles, camera, w, h
    )
    if rendered_mask.is_empty():
        raise PlacementError(f"asset {asset.name!r} projects off-screen")

    backfilled = backfill_depth(frame.depth, old_mask)
    new_depth = composite_depth(backfilled, rendered_depth, rendered_mask)

    edit = dilate_mask(union_masks([old_mask, rendered_mask], w, h), dilation_px)
    rgb = be.inpaint(
        backend,
        be.InpaintRequest(
            image=frame.rgb,
            mask=edit,
            prompt=prompt,
            seed=seed,
            mode="depth_guided",
            depth=new_depth,
        ),
    )
    return replace(frame, rgb=rgb, depth=new_depth), rendered_mask


@dataclass(frozen=True, eq=False)
class PlacedDistractor:
    asset_name: str
    anchor: np.ndarray
    yaw: float
    mask: Mask
    depth: DepthMap
    prompt: str


def place_distractors(
    frame: Frame,
    protected: list[Mask],
    assets: list[MeshAsset],
    count: int,
    seed: int,
    camera,
    backend,
    workspace: Workspace,
    grammar: PromptGrammar,
    retry_budget: int = DISTRACTOR_RETRY_BUDGET,
    dilation_px: int = EDIT_DILATION_PX,
) -> tuple[Frame, list[PlacedDistractor]]:
    """Drop task-irrelevant meshes on the table, rejecting colliding samples.

    A sample is rejected when its rendered bounding box touches any
    protected bbox or any previously accepted distractor's bbox
    (closed-interval semantics); each slot retries up to the budget and is
    then skipped, so fewer than ``count`` placements is a normal outcome.
    """
    if frame.depth is None:
        raise AugmentationError("distractor placement needs a depth map")
    if count > 0 and not assets:
        raise AugmentationError("no distractor assets available")
    h, w = frame.depth.values.shape
    blocked = [m.bbox() for m in protected if m.bbox() is not None]

    placed: list[PlacedDistractor] = []
    cur_depth = frame.depth
    for slot in range(count):
        for attempt in range(retry_budget):
            tag = f"slot{slot}/try{attempt}"
            asset = assets[seeded_index(split_seed(seed, tag + "/asset"), len(assets))]
            ux = unit_float(split_seed(seed, tag + "/x"))
            uy = unit_float(split_seed(seed, tag + "/y"))
            yaw = 2.0 * np.pi * unit_float(split_seed(seed, tag + "/yaw"))
            anchor = np.array(
                [
                    workspace.x_range[0] + ux * (workspace.x_range[1] - workspace.x_range[0]),
                    workspace.y_range[0] + uy * (workspace.y_range[1] - workspace.y_range[0]),
                    workspace.table_height,
                ]
            )
            verts = place_mesh_vertices(asset, anchor, 1.0, yaw)
            rdepth, rmask = render_vertices_depth(verts, asset.triangles, camera, w, h)
            box = rmask.bbox()
            if box is None:
                continue
            if any(bboxes_overlap(box, other) for other in blocked):
                continue
            cur_depth = composite_depth(cur_depth, rdepth, rmask)
            prompt = sample_prompt(grammar, asset.prompt_noun, split_seed(seed, tag + "/prompt"))
            placed.append(
                PlacedDistractor(
                    asset_name=asset.name,
                    anchor=anchor,
                    yaw=yaw,
                    mask=rmask,
                    depth=rdepth,
                    prompt=prompt,
                )
            )
            blocked.append(box)
            break

    out = frame
    if placed:
        out = replace(frame, depth=cur_depth)
        for d in placed:
            rgb = be.inpaint(
                backend,
                be.InpaintRequest(
                    image=out.rgb,
                    mask=dilate_mask(d.mask, dilation_px),
                    prompt=d.prompt,
                    seed=split_seed(seed, f"paint/{d.asset_name}/{d.anchor[0]!r}/{d.anchor[1]!r}"),
                    mode="depth_guided",
                    depth=cur_depth,
                ),
            )
            out = replace(out, rgb=rgb)
    return out, placed


def augment_background(
    frame: Frame, protected: list[Mask], prompt: str, seed: int, backend
) -> Frame:
    """Inpaint everything outside the protected masks; depth is untouched.

    The edit region is the exact complement of the protected union — no
    dilation here, protected pixels must remain bit-identical.
    """
    h, w = frame.rgb.pixels.shape[:2]
    keep = union_masks(protected, w, h)
    edit = Mask(~keep.bits)
    if edit.is_empty():
        return frame
    rgb = be.inpaint(
        backend,
        be.InpaintRequest(image=frame.rgb, mask=edit, prompt=prompt, seed=seed, mode="inpaint"),
    )
    return replace(frame, rgb=rgb)


def rewrite_language(
    description: str, old_label: str, new_label: str, warnings: Optional[list] = None
) -> str:
    """Replace the first whole-word, case-insensitive occurrence of a label.

    When the label does not occur, the description is returned unchanged
    and a warning is recorded on the provided list.
    """
    if not old_label or not new_label:
        raise ValueError("labels must be non-empty")
    pattern = re.compile(r"(?<!\w)" + re.escape(old_label) + r"(?!\w)", re.IGNORECASE)
    result, n = pattern.subn(lambda _m: new_label, description, count=1)
    if n == 0:
        if warnings is not None:
            warnings.append(
                f"language rewrite: label {old_label!r} not found in {description!r}"
            )
        return description
    return result


# -- plan execution ----------------------------------------------------------


def apply_plan(
    episode: Episode, plan: AugmentationPlan, config: StructuredConfig, backend
) -> tuple[Episode, list[str]]:
    """Execute a plan on an episode's observation frame.

    Returns the augmented episode (still carrying the source id; the
    pipeline renames it) and a list of warning/ event strings for the
    provenance record.
    """
    events: list[str] = []
    camera = episode.primary_camera_model()
    frame0 = episode.frames[0]
    obj_mask = episode.object_mask
    rec_mask = episode.receptacle_mask
    task_text = episode.task_text
    obj_label = episode.object_label
    rec_label = episode.receptacle_label
    by_name = {a.name: a for a in config.catalog}

    if "object_shape" in plan.components:
        asset = by_name[plan.replacement_object]
        frame0, new_mask = augment_cross_category(
            frame0, obj_mask, asset, plan.object_prompt,
            plan.seeds["object_shape"], camera, backend, config.edit_dilation_px,
        )
        task_text = rewrite_language(task_text, obj_label, asset.prompt_noun, events)
        obj_label = asset.prompt_noun
        obj_mask = new_mask
    elif "object_texture" in plan.components:
        frame0 = augment_in_category(
            frame0, obj_mask, plan.object_prompt,
            plan.seeds["object_texture"], backend, config.edit_dilation_px,
        )

    if "receptacle_shape" in plan.components:
        asset = by_name[plan.replacement_receptacle]
        frame0, new_mask = augment_cross_category(
            frame0, rec_mask, asset, plan.receptacle_prompt,
            plan.seeds["receptacle_shape"], camera, backend, config.edit_dilation_px,
        )
        task_text = rewrite_language(task_text, rec_label, asset.prompt_noun, events)
        rec_label = asset.prompt_noun
        rec_mask = new_mask
    elif "receptacle_texture" in plan.components:
        frame0 = augment_in_category(
            frame0, rec_mask, plan.receptacle_prompt,
            plan.seeds["receptacle_texture"], backend, config.edit_dilation_px,
        )

    placed: list[PlacedDistractor] = []
    if "distractors" in plan.components and plan.distractor_count > 0:
        frame0, placed = place_distractors(
            frame0,
            [obj_mask, rec_mask],
            config.assets_with_role("distractor"),
            plan.distractor_count,
            plan.seeds["distractors"],
            camera,
            backend,
            config.workspace,
            config.grammar,
            config.distractor_retry_budget,
            config.edit_dilation_px,
        )
        if len(placed) < plan.distractor_count:
            events.append(
                f"placed {len(placed)} of {plan.distractor_count} distractors "
                f"(rejections exhausted the retry budget)"
            )

    if "table_background" in plan.components:
        protected = [obj_mask, rec_mask] + [d.mask for d in placed]
        frame0 = augment_background(
            frame0, protected, plan.background_prompt,
            plan.seeds["table_background"], backend,
        )

    augmented = replace(
        episode,
        frames=(frame0,) + tuple(episode.frames[1:]),
        task_text=task_text,
        object_label=obj_label,
        receptacle_label=rec_label,
        object_mask=obj_mask,
        receptacle_mask=rec_mask,
    )
    return augmented, events
