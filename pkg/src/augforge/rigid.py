"""Rigid transforms (SO(3) rotation + translation) on 3D points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9


def _as_matrix3(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """A proper rigid transform: y = R @ x + t.

    The rotation must be orthonormal with determinant +1, both to 1e-9.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = _as_matrix3(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation not orthonormal: |R^T R - I| = {err:.3e}")
        det = np.linalg.det(r)
        if abs(det - 1.0) > ORTHONORMAL_TOL:
            raise ValueError(f"rotation determinant {det!r} != +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_matrix(m) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix (row-major nested lists ok)."""
        a = np.asarray(m, dtype=np.float64)
        if a.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {a.shape}")
        if not np.allclose(a[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise ValueError("last row of homogeneous matrix must be [0 0 0 1]")
        return RigidTransform(a[:3, :3], a[:3, 3])

    @staticmethod
    def translate(v) -> "RigidTransform":
        return RigidTransform(np.eye(3), np.asarray(v, dtype=np.float64))

    @staticmethod
    def rotate_axis(axis, angle: float) -> "RigidTransform":
        return RigidTransform(rotation_about_axis(axis, angle), np.zeros(3))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply *other* first, then self."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, points) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    a = np.asarray(axis, dtype=np.float64).reshape(3)
    n = np.linalg.norm(a)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"axis must be unit length, |axis| = {n!r}")
    a = a / n
    k = np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)
