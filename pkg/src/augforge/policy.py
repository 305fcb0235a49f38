"""Policy-side numeric utilities: pick/place label conversion and temporal
aggregation of overlapping action chunks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from augforge.geometry.topdown import Workspace, topdown_pixel_to_world


@dataclass(frozen=True, eq=False)
class PickPlaceLabel:
    pick_px: tuple
    place_px: tuple
    pick_world: np.ndarray
    place_world: np.ndarray


@dataclass(frozen=True, eq=False)
class ActionChunk:
    """A prediction of H future action vectors issued at one time step."""

    issued_at: int
    actions: np.ndarray  # (H, action_width)

    def __post_init__(self):
        a = np.asarray(self.actions, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError(f"actions must be (H >= 1, width), got {a.shape}")
        object.__setattr__(self, "actions", a)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def covers(self, t: int) -> bool:
        return self.issued_at <= t < self.issued_at + self.horizon


def label_to_world(
    pick_px, place_px, heightmap: np.ndarray, ws: Workspace
) -> PickPlaceLabel:
    """Convert annotated pick/place pixels on a top-down map to world points."""
    return PickPlaceLabel(
        pick_px=(int(pick_px[0]), int(pick_px[1])),
        place_px=(int(place_px[0]), int(place_px[1])),
        pick_world=topdown_pixel_to_world(pick_px, heightmap, ws),
        place_world=topdown_pixel_to_world(place_px, heightmap, ws),
    )


def temporal_aggregate(chunks, t: int, m: float = 0.1) -> np.ndarray:
    """Blend overlapping chunk predictions for step ``t``.

    A chunk of age k = t - issued_at contributes its prediction for step t
    with weight proportional to exp(-m * k), normalized to sum 1. With
    m = 0 this is the unweighted mean; as m grows the blend converges to
    the minimum-age (most recent) covering chunk's prediction.
    """
    covering = [c for c in chunks if c.covers(t)]
    if not covering:
        raise ValueError(f"no chunk covers step {t}")
    widths = {c.actions.shape[1] for c in covering}
    if len(widths) > 1:
        raise ValueError(f"covering chunks disagree on action width: {sorted(widths)}")

    ages = np.array([t - c.issued_at for c in covering], dtype=np.float64)
    weights = np.exp(-m * ages)
    weights /= weights.sum()
    predictions = np.stack([c.actions[t - c.issued_at] for c in covering])
    return weights @ predictions
