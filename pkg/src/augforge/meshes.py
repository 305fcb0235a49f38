"""Mesh asset storage: a minimal OBJ subset plus the catalog index.

Only ``v x y z`` and triangulated ``f i j k`` lines are accepted (comments
and blank lines are skipped); anything else is a format error naming the
offending line.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from augforge.dataset import DatasetError
from augforge.types import MeshAsset


def load_obj(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing mesh file: {path}")
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) != 4:
                    raise DatasetError(f"{path}:{lineno}: malformed vertex {line!r}")
                verts.append([float(x) for x in parts[1:]])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise DatasetError(
                        f"{path}:{lineno}: face {len(faces)} is not a triangle: {line!r}"
                    )
                idx = []
                for token in parts[1:]:
                    if "/" in token:
                        raise DatasetError(
                            f"{path}:{lineno}: face {len(faces)} uses unsupported "
                            f"vertex attributes: {token!r}"
                        )
                    i = int(token)
                    if i < 1:
                        raise DatasetError(
                            f"{path}:{lineno}: face {len(faces)} has non-positive index {i}"
                        )
                    idx.append(i - 1)
                faces.append(idx)
            else:
                raise DatasetError(
                    f"{path}:{lineno}: unsupported OBJ directive {parts[0]!r}"
                )
    if not faces:
        raise DatasetError(f"{path}: mesh has no faces")
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if f.max() >= len(verts):
        raise DatasetError(f"{path}: face index {int(f.max()) + 1} out of range")
    return v, f


def save_obj(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"v {float(x)!r} {float(y)!r} {float(z)!r}"
        for x, y, z in np.asarray(vertices, dtype=np.float64)
    ]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(triangles)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh_catalog(path) -> list[MeshAsset]:
    """Load the catalog index (catalog.json) and every mesh it references."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing catalog index: {path}")
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not entries:
        raise DatasetError(f"empty mesh catalog: {path}")
    assets = []
    for entry in entries:
        mesh_path = path.parent / entry["file"]
        verts, tris = load_obj(mesh_path)
        try:
            asset = MeshAsset(
                vertices=verts,
                triangles=tris,
                category=entry["category"],
                prompt_noun=entry["prompt_noun"],
                role_tags=frozenset(entry["role_tags"]),
                name=Path(entry["file"]).stem,
            )
        except ValueError as exc:
            raise DatasetError(f"{mesh_path}: {exc}") from exc
        assets.append(asset)
    return assets


def save_mesh_catalog(meshes_dir, assets: list[MeshAsset]) -> None:
    meshes_dir = Path(meshes_dir)
    meshes_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for asset in assets:
        fname = f"{asset.name}.obj"
        save_obj(meshes_dir / fname, asset.vertices, asset.triangles)
        entries.append(
            {
                "file": fname,
                "category": asset.category,
                "prompt_noun": asset.prompt_noun,
                "role_tags": sorted(asset.role_tags),
            }
        )
    with open(meshes_dir / "catalog.json", "w", encoding="utf-8") as fh:
        json.dump(entries, fh, indent=1, sort_keys=True)
        fh.write("\n")


def role_counts(assets) -> dict[str, int]:
    """How many assets carry each role tag (an asset may carry several)."""
    counts = {"object": 0, "receptacle": 0, "distractor": 0}
    for asset in assets:
        for tag in asset.role_tags:
            counts[tag] += 1
    return counts


def assets_with_role(assets, role: str) -> list[MeshAsset]:
    return [a for a in assets if role in a.role_tags]
