"""augforge: deterministic semantic augmentation for robot demonstration data."""

__version__ = "0.1.0"
