"""Re-export of the rigid-transform primitives for the geometry namespace."""

from augforge.rigid import ORTHONORMAL_TOL, RigidTransform, rotation_about_axis

__all__ = ["ORTHONORMAL_TOL", "RigidTransform", "rotation_about_axis"]
