"""Domain types: images, depth maps, cameras, masks, episodes, mesh assets.

Constructors enforce structural invariants (shapes, dtypes, scalar ranges)
and raise ValueError on violation. Content-level invariants that must be
reportable as data (NaN depth pixels, cross-object dimension mismatches,
joint-vector lengths) are checked by ``dataset.validate_episode`` instead,
so that malformed episodes can be represented and diagnosed.

All types are treated as immutable values after construction and may be
shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from augforge.rigid import RigidTransform

# 16-bit millimeter storage bound; depths above this are not representable.
MAX_DEPTH_M = 65.535

VALID_ROLE_TAGS = frozenset({"object", "receptacle", "distractor"})


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle with inclusive corners."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"degenerate rect {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit RGB image, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.pixels)
        if p.dtype != np.uint8:
            raise ValueError(f"image pixels must be uint8, got {p.dtype}")
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"image must have shape (h, w, 3), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @staticmethod
    def filled(width: int, height: int, color=(0, 0, 0)) -> "Image":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = np.asarray(color, dtype=np.uint8)
        return Image(arr)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Scalar depth field in meters; 0 marks invalid pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"depth must be 2-D, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("depth dimensions must be >= 1")
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def valid(self) -> np.ndarray:
        """Boolean array of pixels carrying a real measurement."""
        return self.values > 0.0


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary pixel membership."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits)
        if b.dtype != np.bool_:
            b = b.astype(bool)
        if b.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {b.shape}")
        object.__setattr__(self, "bits", b)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def is_empty(self) -> bool:
        return not self.bits.any()

    def bbox(self) -> Optional[Rect]:
        """Tight bounding rectangle of set pixels; None for an empty mask."""
        rows = np.flatnonzero(self.bits.any(axis=1))
        if rows.size == 0:
            return None
        cols = np.flatnonzero(self.bits.any(axis=0))
        return Rect(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))

    @staticmethod
    def empty(width: int, height: int) -> "Mask":
        return Mask(np.zeros((height, width), dtype=bool))

    @staticmethod
    def full(width: int, height: int) -> "Mask":
        return Mask(np.ones((height, width), dtype=bool))


def union_masks(masks, width: int, height: int) -> Mask:
    """Pixel-wise union; all masks must match the given dimensions."""
    out = np.zeros((height, width), dtype=bool)
    for m in masks:
        if m.bits.shape != (height, width):
            raise ValueError(
                f"mask dimensions {m.bits.shape} do not match ({height}, {width})"
            )
        out |= m.bits
    return Mask(out)


def dilate_mask(mask: Mask, pixels: int) -> Mask:
    """Dilate by *pixels* in Chebyshev distance (square structuring element)."""
    box = mask.bbox()
    if pixels <= 0 or box is None:
        return mask
    h, w = mask.bits.shape
    # dilation cannot escape the bbox grown by the radius
    y0 = max(box.y0 - pixels, 0)
    y1 = min(box.y1 + pixels, h - 1)
    x0 = max(box.x0 - pixels, 0)
    x1 = min(box.x1 + pixels, w - 1)
    crop = ndimage.binary_dilation(
        mask.bits[y0 : y1 + 1, x0 : x1 + 1],
        structure=np.ones((3, 3), dtype=bool),
        iterations=pixels,
    )
    grown = np.zeros((h, w), dtype=bool)
    grown[y0 : y1 + 1, x0 : x1 + 1] = crop
    return Mask(grown)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera; ``pose`` places the camera frame in the world frame.

    Camera coordinates: x right, y down, z forward (optical axis). A world
    point p projects at u = fx*x/z + cx, v = fy*y/z + cy after mapping into
    the camera frame via pose.inverse().
    """

    fx: float
    fy: float
    cx: float
    cy: float
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got {self.fx}, {self.fy}")


def _as_vector(values) -> np.ndarray:
    """Canonical 1-D float64 array; already-canonical inputs pass through
    unchanged so dataclasses.replace keeps payload identity."""
    if (
        isinstance(values, np.ndarray)
        and values.dtype == np.float64
        and values.ndim == 1
        and values.flags.c_contiguous
    ):
        return values
    return np.ascontiguousarray(values, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class Frame:
    """One time step of a demonstration.

    ``rgb``/``depth`` belong to the episode's primary camera; additional
    named views live in ``extra_views`` keyed by camera name.
    """

    rgb: Image
    depth: Optional[DepthMap]
    joints: np.ndarray
    gripper: float
    action: np.ndarray
    extra_views: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "joints", _as_vector(self.joints))
        object.__setattr__(self, "action", _as_vector(self.action))
        object.__setattr__(self, "gripper", float(self.gripper))


@dataclass(frozen=True, eq=False)
class Episode:
    """A demonstration trajectory plus its annotations."""

    id: str
    frames: tuple
    task_text: str
    object_label: str
    receptacle_label: str
    chain_ref: str
    cameras: dict
    primary_camera: str
    object_mask: Optional[Mask] = None
    receptacle_mask: Optional[Mask] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.id:
            raise ValueError("episode id must be non-empty")
        if self.primary_camera not in self.cameras:
            raise ValueError(
                f"primary camera {self.primary_camera!r} not among {sorted(self.cameras)}"
            )

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def primary_camera_model(self) -> CameraModel:
        return self.cameras[self.primary_camera]

    def with_id(self, new_id: str) -> "Episode":
        return replace(self, id=new_id)


@dataclass(frozen=True, eq=False)
class MeshAsset:
    """Triangulated mesh with catalog metadata.

    Vertices are meters in a z-up asset frame; the asset's support plane is
    the minimum-z face of its bounding box.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    category: str
    prompt_noun: str
    role_tags: frozenset
    name: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError(f"triangles must be (m, 3), got {t.shape}")
        if t.shape[0] < 1:
            raise ValueError("mesh must have at least one triangle")
        if not np.isfinite(v).all():
            raise ValueError("mesh vertices must be finite")
        if t.min(initial=0) < 0 or t.max(initial=-1) >= v.shape[0]:
            raise ValueError("triangle index out of range")
        bad = frozenset(self.role_tags) - VALID_ROLE_TAGS
        if bad:
            raise ValueError(f"unknown role tags {sorted(bad)}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "role_tags", frozenset(self.role_tags))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)
