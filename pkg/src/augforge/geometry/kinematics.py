"""Serial-chain forward kinematics and chain-file loading.

Chain files (``chains/<name>.json``) hold ordered joint records with 4x4
row-major origin transforms, a unit axis, a kind (revolute | prismatic) and
limits, plus an end-effector offset and optional per-joint link geometry
used for robot-mask rendering.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from augforge.rigid import RigidTransform, rotation_about_axis

AXIS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Capsule:
    """Capsule in the link frame: segment p0-p1 swept by a sphere of ``radius``."""

    radius: float
    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("capsule radius must be positive")
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=np.float64).reshape(3))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=np.float64).reshape(3))


@dataclass(frozen=True, eq=False)
class Box:
    """Box in the link frame, given by half-extents and a local pose."""

    half_extents: np.ndarray
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        h = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if (h <= 0).any():
            raise ValueError("box half-extents must be positive")
        object.__setattr__(self, "half_extents", h)


LinkPrimitive = Union[Capsule, Box]


@dataclass(frozen=True, eq=False)
class Joint:
    origin: RigidTransform
    axis: np.ndarray
    kind: str
    limits: tuple

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(a) - 1.0) > 1e-6:
            raise ValueError(f"joint axis must be unit length, got {a}")
        if self.kind not in ("revolute", "prismatic"):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if lo > hi:
            raise ValueError(f"joint limits inverted: [{lo}, {hi}]")
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True, eq=False)
class KinematicChain:
    joints: tuple
    end_effector_offset: RigidTransform = field(default_factory=RigidTransform.identity)
    links: tuple = ()  # per-joint LinkPrimitive or None, may be empty

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "links", tuple(self.links))

    @property
    def num_joints(self) -> int:
        return len(self.joints)


@dataclass(frozen=True, eq=False)
class FKResult:
    joint_transforms: tuple  # world pose of each joint frame
    end_effector: RigidTransform


def _joint_motion(joint: Joint, q: float) -> RigidTransform:
    if joint.kind == "revolute":
        return RigidTransform(rotation_about_axis(joint.axis, q), np.zeros(3))
    return RigidTransform(np.eye(3), joint.axis * q)


def forward_kinematics(chain: KinematicChain, q) -> FKResult:
    """World transforms of every joint frame plus the end effector.

    Transform i composes the fixed origins and joint motions of joints
    0..i; the end effector appends ``end_effector_offset`` to the last
    joint frame. Out-of-limit joint values warn but do not fail.
    """
    qv = np.asarray(q, dtype=np.float64).reshape(-1)
    if qv.size != chain.num_joints:
        raise ValueError(
            f"joint vector length {qv.size} does not match chain ({chain.num_joints})"
        )
    current = RigidTransform.identity()
    transforms = []
    for i, (joint, qi) in enumerate(zip(chain.joints, qv)):
        lo, hi = joint.limits
        if not (lo <= qi <= hi):
            warnings.warn(
                f"joint {i} value {qi!r} outside limits [{lo}, {hi}]",
                stacklevel=2,
            )
        current = current @ joint.origin @ _joint_motion(joint, float(qi))
        transforms.append(current)
    return FKResult(tuple(transforms), current @ chain.end_effector_offset)


def _parse_primitive(rec: dict) -> Optional[LinkPrimitive]:
    if rec is None:
        return None
    kind = rec.get("type")
    if kind == "capsule":
        return Capsule(radius=rec["radius"], p0=rec["p0"], p1=rec["p1"])
    if kind == "box":
        pose = RigidTransform.from_matrix(rec["pose"]) if "pose" in rec else RigidTransform.identity()
        return Box(half_extents=rec["half_extents"], pose=pose)
    raise ValueError(f"unknown link primitive type {kind!r}")


def load_chain(path) -> KinematicChain:
    """Load a kinematic chain description from a JSON file."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    joints = tuple(
        Joint(
            origin=RigidTransform.from_matrix(rec["origin"]),
            axis=rec["axis"],
            kind=rec["kind"],
            limits=tuple(rec["limits"]),
        )
        for rec in doc["joints"]
    )
    ee = (
        RigidTransform.from_matrix(doc["end_effector_offset"])
        if "end_effector_offset" in doc
        else RigidTransform.identity()
    )
    links = tuple(_parse_primitive(rec) for rec in doc.get("links", []))
    if links and len(links) != len(joints):
        raise ValueError(
            f"links array length {len(links)} does not match joint count {len(joints)}"
        )
    return KinematicChain(joints=joints, end_effector_offset=ee, links=links)


def save_chain(path, chain: KinematicChain) -> None:
    doc = {
        "joints": [
            {
                "origin": j.origin.as_matrix().tolist(),
                "axis": j.axis.tolist(),
                "kind": j.kind,
                "limits": list(j.limits),
            }
            for j in chain.joints
        ],
        "end_effector_offset": chain.end_effector_offset.as_matrix().tolist(),
    }
    if chain.links:
        recs = []
        for prim in chain.links:
            if prim is None:
                recs.append(None)
            elif isinstance(prim, Capsule):
                recs.append(
                    {"type": "capsule", "radius": prim.radius, "p0": prim.p0.tolist(), "p1": prim.p1.tolist()}
                )
            else:
                recs.append(
                    {
                        "type": "box",
                        "half_extents": prim.half_extents.tolist(),
                        "pose": prim.pose.as_matrix().tolist(),
                    }
                )
        doc["links"] = recs
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
