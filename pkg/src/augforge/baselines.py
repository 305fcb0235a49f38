"""Baseline augmenters: copy-paste, random background, random distractors,
and SE(2) spatial transforms of the object crop.

These RGB-only baselines paste segmented patches from a local patch
library (any directory of paired ``*.rgb.png`` / ``*.mask.png`` files);
depth is never modified.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from augforge import png_io
from augforge.seeding import seeded_index, split_seed, unit_float
from augforge.types import Frame, Image, Mask, Rect, union_masks
from augforge.geometry.raster import bboxes_overlap

BASELINE_MODES = ("copy_paste", "random_background", "random_distractors", "spatial")

SPATIAL_MAX_ROTATION = np.pi / 6
SPATIAL_MAX_TRANSLATION = 0.2  # fraction of the image extent
DISTRACTOR_PASTE_RETRIES = 20


class PatchLibraryError(Exception):
    pass


def load_patch_library(path) -> list[tuple[Image, Mask]]:
    """Load paired rgb/mask patches, sorted by file name for determinism."""
    path = Path(path)
    patches = []
    for rgb_path in sorted(path.glob("*.rgb.png")):
        mask_path = rgb_path.with_name(rgb_path.name.replace(".rgb.png", ".mask.png"))
        if not mask_path.exists():
            raise PatchLibraryError(f"patch {rgb_path.name} has no paired mask")
        rgb = Image(png_io.decode_rgb(rgb_path.read_bytes()))
        mask = Mask(png_io.decode_mask(mask_path.read_bytes()))
        if mask.bits.shape != rgb.pixels.shape[:2]:
            raise PatchLibraryError(f"patch {rgb_path.name} mask dimensions mismatch")
        patches.append((rgb, mask))
    return patches


def _paste(pixels: np.ndarray, patch: Image, alpha: Mask, x0: int, y0: int) -> None:
    ph, pw = alpha.bits.shape
    pixels[y0 : y0 + ph, x0 : x0 + pw][alpha.bits] = patch.pixels[alpha.bits]


def _seeded_paste_origin(seed: int, tag: str, width: int, height: int, pw: int, ph: int):
    x0 = int(unit_float(split_seed(seed, tag + "/x")) * max(width - pw, 0) + 0.5)
    y0 = int(unit_float(split_seed(seed, tag + "/y")) * max(height - ph, 0) + 0.5)
    return x0, y0


def _resize_nearest(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    src_h, src_w = pixels.shape[:2]
    rows = (np.arange(height) * src_h) // height
    cols = (np.arange(width) * src_w) // width
    return pixels[rows[:, None], cols[None, :]]


def _copy_paste(frame: Frame, library, seed: int, n_patches: int) -> Frame:
    out = frame.rgb.pixels.copy()
    h, w = out.shape[:2]
    for i in range(n_patches):
        tag = f"paste{i}"
        patch, alpha = library[seeded_index(split_seed(seed, tag + "/idx"), len(library))]
        if patch.width > w or patch.height > h:
            continue
        x0, y0 = _seeded_paste_origin(seed, tag, w, h, patch.width, patch.height)
        _paste(out, patch, alpha, x0, y0)
    return replace(frame, rgb=Image(out))


def _random_background(frame: Frame, library, seed: int, protected) -> Frame:
    h, w = frame.rgb.pixels.shape[:2]
    source, _ = library[seeded_index(split_seed(seed, "bg/idx"), len(library))]
    background = _resize_nearest(source.pixels, h, w)
    keep = union_masks(list(protected), w, h)
    out = np.where(keep.bits[..., None], frame.rgb.pixels, background)
    return replace(frame, rgb=Image(out))


def _random_distractors(frame: Frame, library, seed: int, protected, n_patches: int) -> Frame:
    out = frame.rgb.pixels.copy()
    h, w = out.shape[:2]
    blocked = [m.bbox() for m in protected if m.bbox() is not None]
    for i in range(n_patches):
        for attempt in range(DISTRACTOR_PASTE_RETRIES):
            tag = f"distractor{i}/try{attempt}"
            patch, alpha = library[seeded_index(split_seed(seed, tag + "/idx"), len(library))]
            if patch.width > w or patch.height > h:
                break
            x0, y0 = _seeded_paste_origin(seed, tag, w, h, patch.width, patch.height)
            pbox = alpha.bbox()
            if pbox is None:
                continue
            box = Rect(x0 + pbox.x0, y0 + pbox.y0, x0 + pbox.x1, y0 + pbox.y1)
            if any(bboxes_overlap(box, other) for other in blocked):
                continue
            _paste(out, patch, alpha, x0, y0)
            blocked.append(box)
            break
    return replace(frame, rgb=Image(out))


def _spatial(frame: Frame, seed: int, object_mask: Mask) -> Frame:
    """Re-composite the object crop under a seeded SE(2) transform.

    Nearest-neighbor sampling through the inverse map; a zero transform
    reproduces the input exactly.
    """
    box = object_mask.bbox()
    if box is None:
        return frame
    h, w = frame.rgb.pixels.shape[:2]
    theta = (2.0 * unit_float(split_seed(seed, "spatial/theta")) - 1.0) * SPATIAL_MAX_ROTATION
    tx = (2.0 * unit_float(split_seed(seed, "spatial/tx")) - 1.0) * SPATIAL_MAX_TRANSLATION * w
    ty = (2.0 * unit_float(split_seed(seed, "spatial/ty")) - 1.0) * SPATIAL_MAX_TRANSLATION * h

    cx = (box.x0 + box.x1) / 2.0
    cy = (box.y0 + box.y1) / 2.0
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)

    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    # inverse map: rotate dest about the crop center by -theta, undo translation
    dx = xx - cx - tx
    dy = yy - cy - ty
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy
    sxi = np.round(sx).astype(np.int64)
    syi = np.round(sy).astype(np.int64)
    inside = (sxi >= 0) & (sxi < w) & (syi >= 0) & (syi < h)
    sxi_c = np.clip(sxi, 0, w - 1)
    syi_c = np.clip(syi, 0, h - 1)
    hit = inside & object_mask.bits[syi_c, sxi_c]

    out = frame.rgb.pixels.copy()
    out[hit] = frame.rgb.pixels[syi_c[hit], sxi_c[hit]]
    return replace(frame, rgb=Image(out))


def baseline_augment(
    frame: Frame,
    mode: str,
    patch_library,
    seed: int,
    protected=(),
    object_mask=None,
    n_patches: int = 1,
) -> Frame:
    """Apply one of the baseline augmentation modes to a frame."""
    if mode not in BASELINE_MODES:
        raise ValueError(f"unknown baseline mode {mode!r}")
    if mode in ("copy_paste", "random_background", "random_distractors") and not patch_library:
        raise PatchLibraryError("patch library is empty")
    if mode == "copy_paste":
        return _copy_paste(frame, patch_library, seed, n_patches)
    if mode == "random_background":
        return _random_background(frame, patch_library, seed, protected)
    if mode == "random_distractors":
        return _random_distractors(frame, patch_library, seed, protected, n_patches)
    if object_mask is None:
        raise ValueError("spatial mode needs the object mask")
    return _spatial(frame, seed, object_mask)


# -- dataset-level runner ------------------------------------------------


def run_baseline(dataset_root, output_root, mode: str, patches_dir, seed: int):
    """Apply one baseline mode to every episode of a dataset.

    Like the structured regime, baselines edit the annotated observation
    frame (frame 0) only; each source episode yields one augmented copy
    named ``<id>__<mode>``. Depth and actions pass through untouched.
    """
    from dataclasses import replace as _replace
    from pathlib import Path

    from augforge.dataset import DatasetManifest, load_episode, load_manifest, save_episode, save_manifest
    from augforge.seeding import derive_seed

    dataset_root = Path(dataset_root)
    output_root = Path(output_root)
    manifest_in = load_manifest(dataset_root)
    library = load_patch_library(patches_dir) if patches_dir is not None else []
    if mode != "spatial" and not library:
        raise PatchLibraryError(f"patch library {patches_dir!r} is empty")

    entries = []
    for rec in sorted(manifest_in.episodes, key=lambda r: r["id"]):
        episode = load_episode(dataset_root, rec["id"])
        protected = [m for m in (episode.object_mask, episode.receptacle_mask) if m is not None]
        if mode == "spatial" and episode.object_mask is None:
            raise PatchLibraryError(f"episode {episode.id!r} has no object mask for spatial mode")
        frame0 = baseline_augment(
            episode.frames[0],
            mode,
            library,
            derive_seed(seed, episode.id, 0, 0, f"baseline/{mode}"),
            protected=protected,
            object_mask=episode.object_mask,
            n_patches=3 if mode == "random_distractors" else 1,
        )
        out_id = f"{episode.id}__{mode}"
        save_episode(
            output_root,
            _replace(episode, id=out_id, frames=(frame0,) + tuple(episode.frames[1:])),
        )
        entries.append({"id": out_id, "frames": episode.num_frames})

    manifest = DatasetManifest(
        dataset_id=f"{manifest_in.dataset_id}__{mode}", episodes=entries
    )
    save_manifest(output_root, manifest)
    return manifest
