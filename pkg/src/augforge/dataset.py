"""Dataset storage: episode load/save/validate and the dataset manifest.

On-disk layout (all JSON UTF-8, numbers in meters/radians unless the field
name says otherwise)::

    dataset/
      manifest.json
      meshes/<name>.obj
      meshes/catalog.json
      chains/<name>.json
      episodes/<id>/meta.json
      episodes/<id>/frames/%06d.<camera>.rgb.png
      episodes/<id>/frames/%06d.<camera>.depth.png   (primary camera only)
      episodes/<id>/masks/000000.object.png
      episodes/<id>/masks/000000.receptacle.png
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from augforge import png_io
from augforge.types import (
    MAX_DEPTH_M,
    CameraModel,
    DepthMap,
    Episode,
    Frame,
    Image,
    Mask,
)
from augforge.rigid import RigidTransform
from augforge.geometry.kinematics import KinematicChain, load_chain

SCHEMA_VERSION = "1"


class DatasetError(Exception):
    """Raised for unreadable, inconsistent, or schema-violating datasets."""


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _read_json(path: Path):
    if not path.exists():
        raise DatasetError(f"missing file: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- episodes ------------------------------------------------------------


def _camera_to_json(cam: CameraModel) -> dict:
    return {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "pose": cam.pose.as_matrix().tolist(),
    }


def _camera_from_json(doc: dict) -> CameraModel:
    return CameraModel(
        fx=doc["fx"],
        fy=doc["fy"],
        cx=doc["cx"],
        cy=doc["cy"],
        pose=RigidTransform.from_matrix(doc["pose"]),
    )


def episode_dir(root, episode_id: str) -> Path:
    return Path(root) / "episodes" / episode_id


def save_episode(root, episode: Episode) -> None:
    """Write an episode; the round trip through load_episode is lossless.

    Depth is quantized to millimeters (round-half-up) at this point; a
    second save of the reloaded episode is byte-identical.
    """
    violations = validate_episode(episode, None)
    if violations:
        raise DatasetError(
            f"episode {episode.id!r} fails validation: " + "; ".join(violations)
        )
    edir = episode_dir(root, episode.id)
    frames_dir = edir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    meta = {
        "schema_version": SCHEMA_VERSION,
        "task_text": episode.task_text,
        "object_label": episode.object_label,
        "receptacle_label": episode.receptacle_label,
        "chain_ref": episode.chain_ref,
        "primary_camera": episode.primary_camera,
        "cameras": {name: _camera_to_json(c) for name, c in episode.cameras.items()},
        "frames": [
            {
                "joints": f.joints.tolist(),
                "gripper": f.gripper,
                "action": f.action.tolist(),
            }
            for f in episode.frames
        ],
    }
    _write_json(edir / "meta.json", meta)

    primary = episode.primary_camera
    for idx, frame in enumerate(episode.frames):
        stem = f"{idx:06d}"
        (frames_dir / f"{stem}.{primary}.rgb.png").write_bytes(
            png_io.encode_rgb(frame.rgb.pixels)
        )
        if frame.depth is not None:
            (frames_dir / f"{stem}.{primary}.depth.png").write_bytes(
                png_io.encode_depth(frame.depth.values)
            )
        for name, view in frame.extra_views.items():
            (frames_dir / f"{stem}.{name}.rgb.png").write_bytes(
                png_io.encode_rgb(view.pixels)
            )

    if episode.object_mask is not None or episode.receptacle_mask is not None:
        masks_dir = edir / "masks"
        masks_dir.mkdir(exist_ok=True)
        if episode.object_mask is not None:
            (masks_dir / "000000.object.png").write_bytes(
                png_io.encode_mask(episode.object_mask.bits)
            )
        if episode.receptacle_mask is not None:
            (masks_dir / "000000.receptacle.png").write_bytes(
                png_io.encode_mask(episode.receptacle_mask.bits)
            )


def load_episode(root, episode_id: str) -> Episode:
    """Load one episode; depth decodes from millimeter integers to meters."""
    edir = episode_dir(root, episode_id)
    meta = _read_json(edir / "meta.json")
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatasetError(f"unknown schema version {version!r} in {edir}")

    cameras = {name: _camera_from_json(doc) for name, doc in meta["cameras"].items()}
    primary = meta["primary_camera"]
    if primary not in cameras:
        raise DatasetError(f"primary camera {primary!r} not declared in {edir}")

    frames = []
    frames_dir = edir / "frames"
    for idx, frec in enumerate(meta["frames"]):
        stem = f"{idx:06d}"
        rgb_path = frames_dir / f"{stem}.{primary}.rgb.png"
        if not rgb_path.exists():
            raise DatasetError(f"missing file: {rgb_path}")
        try:
            rgb = Image(png_io.decode_rgb(rgb_path.read_bytes()))
        except Exception as exc:  # noqa: BLE001 - decoding failure detail matters
            raise DatasetError(f"corrupt image {rgb_path}: {exc}") from exc

        depth: Optional[DepthMap] = None
        depth_path = frames_dir / f"{stem}.{primary}.depth.png"
        if depth_path.exists():
            values = png_io.decode_depth(depth_path.read_bytes())
            if values.shape != rgb.pixels.shape[:2]:
                raise DatasetError(
                    f"depth dimensions {values.shape} do not match rgb "
                    f"{rgb.pixels.shape[:2]} in {depth_path}"
                )
            depth = DepthMap(values)

        extra = {}
        for name in cameras:
            if name == primary:
                continue
            vpath = frames_dir / f"{stem}.{name}.rgb.png"
            if not vpath.exists():
                raise DatasetError(f"missing file: {vpath}")
            extra[name] = Image(png_io.decode_rgb(vpath.read_bytes()))

        frames.append(
            Frame(
                rgb=rgb,
                depth=depth,
                joints=np.asarray(frec["joints"], dtype=np.float64),
                gripper=frec["gripper"],
                action=np.asarray(frec["action"], dtype=np.float64),
                extra_views=extra,
            )
        )

    if not frames:
        raise DatasetError(f"episode {episode_id!r} has no frames")

    def load_mask(kind: str) -> Optional[Mask]:
        mpath = edir / "masks" / f"000000.{kind}.png"
        if not mpath.exists():
            return None
        bits = png_io.decode_mask(mpath.read_bytes())
        if bits.shape != frames[0].rgb.pixels.shape[:2]:
            raise DatasetError(
                f"mask dimensions {bits.shape} do not match image "
                f"{frames[0].rgb.pixels.shape[:2]} in {mpath}"
            )
        return Mask(bits)

    return Episode(
        id=episode_id,
        frames=tuple(frames),
        task_text=meta["task_text"],
        object_label=meta["object_label"],
        receptacle_label=meta["receptacle_label"],
        chain_ref=meta["chain_ref"],
        cameras=cameras,
        primary_camera=primary,
        object_mask=load_mask("object"),
        receptacle_mask=load_mask("receptacle"),
    )


def validate_episode(episode: Episode, chain: Optional[KinematicChain]) -> list[str]:
    """Collect invariant violations as strings; empty means the episode is valid.

    Passing ``chain=None`` skips the chain-dependent joint-length check.
    """
    v: list[str] = []
    if not episode.frames:
        v.append("episode has no frames")
    if episode.object_mask is not None and not episode.object_label:
        v.append("object mask present but object_label empty")
    if episode.receptacle_mask is not None and not episode.receptacle_label:
        v.append("receptacle mask present but receptacle_label empty")

    view_dims: dict[str, tuple] = {}
    action_width: Optional[int] = None
    for idx, frame in enumerate(episode.frames):
        if chain is not None and frame.joints.size != chain.num_joints:
            v.append(
                f"frame {idx}: joints length {frame.joints.size} does not match "
                f"chain ({chain.num_joints} joints)"
            )
        if not (0.0 <= frame.gripper <= 1.0):
            v.append(f"frame {idx}: gripper {frame.gripper!r} outside [0, 1]")
        if action_width is None:
            action_width = frame.action.size
        elif frame.action.size != action_width:
            v.append(
                f"frame {idx}: action width {frame.action.size} != {action_width}"
            )
        dims = frame.rgb.pixels.shape[:2]
        view_dims.setdefault(episode.primary_camera, dims)
        if view_dims[episode.primary_camera] != dims:
            v.append(f"frame {idx}: primary image dimensions changed to {dims}")
        for name, view in frame.extra_views.items():
            vd = view.pixels.shape[:2]
            view_dims.setdefault(name, vd)
            if view_dims[name] != vd:
                v.append(f"frame {idx}: view {name!r} dimensions changed to {vd}")
        if frame.depth is not None:
            if frame.depth.values.shape != dims:
                v.append(
                    f"frame {idx}: depth dimensions {frame.depth.values.shape} "
                    f"do not match rgb {dims}"
                )
            else:
                values = frame.depth.values
                bad = ~(np.isfinite(values) & (values >= 0.0))
                if bad.any():
                    yy, xx = np.nonzero(bad)
                    v.append(
                        f"frame {idx}: invalid depth value {values[yy[0], xx[0]]!r} "
                        f"at pixel ({xx[0]}, {yy[0]})"
                    )
                deep = values > MAX_DEPTH_M
                if deep.any():
                    yy, xx = np.nonzero(deep)
                    v.append(
                        f"frame {idx}: depth {values[yy[0], xx[0]]!r} at pixel "
                        f"({xx[0]}, {yy[0]}) exceeds representable "
                        f"{MAX_DEPTH_M} m"
                    )

    if episode.frames:
        dims0 = episode.frames[0].rgb.pixels.shape[:2]
        for kind, mask in (
            ("object", episode.object_mask),
            ("receptacle", episode.receptacle_mask),
        ):
            if mask is not None and mask.bits.shape != dims0:
                v.append(
                    f"{kind} mask dimensions {mask.bits.shape} do not match "
                    f"frame 0 image {dims0}"
                )
    return v


# -- manifest ------------------------------------------------------------


@dataclass
class DatasetManifest:
    dataset_id: str
    schema_version: str = SCHEMA_VERSION
    episodes: list = field(default_factory=list)  # [{"id", "frames"}]
    augmentations: list = field(default_factory=list)  # AugmentationRecord dicts
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "schema_version": self.schema_version,
            "episodes": self.episodes,
            "augmentations": self.augmentations,
            "failures": self.failures,
        }

    @staticmethod
    def from_json(doc: dict) -> "DatasetManifest":
        return DatasetManifest(
            dataset_id=doc["dataset_id"],
            schema_version=doc.get("schema_version", SCHEMA_VERSION),
            episodes=list(doc.get("episodes", [])),
            augmentations=list(doc.get("augmentations", [])),
            failures=list(doc.get("failures", [])),
        )


def save_manifest(root, manifest: DatasetManifest) -> None:
    _write_json(Path(root) / "manifest.json", manifest.to_json())


def load_manifest(root) -> DatasetManifest:
    doc = _read_json(Path(root) / "manifest.json")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"unknown manifest schema version {doc.get('schema_version')!r}")
    return DatasetManifest.from_json(doc)


def validate_dataset(root) -> list[str]:
    """Check the manifest against what is actually stored."""
    root = Path(root)
    problems: list[str] = []
    try:
        manifest = load_manifest(root)
    except DatasetError as exc:
        return [str(exc)]
    chains: dict[str, KinematicChain] = {}
    for rec in manifest.episodes:
        eid = rec["id"]
        try:
            episode = load_episode(root, eid)
        except DatasetError as exc:
            problems.append(f"episode {eid!r}: {exc}")
            continue
        if episode.num_frames != rec["frames"]:
            problems.append(
                f"episode {eid!r}: manifest says {rec['frames']} frames, "
                f"found {episode.num_frames}"
            )
        chain = None
        chain_path = root / "chains" / f"{episode.chain_ref}.json"
        if episode.chain_ref:
            if episode.chain_ref not in chains and chain_path.exists():
                chains[episode.chain_ref] = load_chain(chain_path)
            chain = chains.get(episode.chain_ref)
        problems.extend(
            f"episode {eid!r}: {msg}" for msg in validate_episode(episode, chain)
        )
    return problems
