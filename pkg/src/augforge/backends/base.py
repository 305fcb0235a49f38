"""Service contracts for generation, segmentation, and tracking backends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, runtime_checkable

import numpy as np

from augforge.types import DepthMap, Image, Mask

MODE_INPAINT = "inpaint"
MODE_DEPTH_GUIDED = "depth_guided"


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Connection/timeout failure after exhausting retries."""


class ServerError(BackendError):
    """The server answered with an error status."""

    def __init__(self, status: int, message: str):
        super().__init__(f"server error {status}: {message}")
        self.status = status


@dataclass(frozen=True, eq=False)
class InpaintRequest:
    """g(o, t, z): synthesize the masked region of ``image`` from prompt ``t``.

    ``depth`` must be present exactly when mode is depth_guided.
    """

    image: Image
    mask: Mask
    prompt: str
    seed: int
    mode: str = MODE_INPAINT
    depth: Optional[DepthMap] = None

    def __post_init__(self):
        if self.mode not in (MODE_INPAINT, MODE_DEPTH_GUIDED):
            raise ValueError(f"unknown inpaint mode {self.mode!r}")
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.mask.bits.shape != self.image.pixels.shape[:2]:
            raise ValueError(
                f"mask {self.mask.bits.shape} does not match image "
                f"{self.image.pixels.shape[:2]}"
            )
        if (self.depth is not None) != (self.mode == MODE_DEPTH_GUIDED):
            raise ValueError("depth must be present iff mode is depth_guided")
        if self.depth is not None and self.depth.values.shape != self.image.pixels.shape[:2]:
            raise ValueError(
                f"depth {self.depth.values.shape} does not match image "
                f"{self.image.pixels.shape[:2]}"
            )
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))


@dataclass(frozen=True, eq=False)
class SegmentRequest:
    """Point-prompted segmentation, or segment-everything when point is None."""

    image: Image
    point: Optional[tuple] = None

    def __post_init__(self):
        if self.point is not None:
            x, y = int(self.point[0]), int(self.point[1])
            if not (0 <= x < self.image.width and 0 <= y < self.image.height):
                raise ValueError(
                    f"point ({x}, {y}) outside {self.image.width}x{self.image.height} image"
                )
            object.__setattr__(self, "point", (x, y))


@dataclass(frozen=True, eq=False)
class TrackRequest:
    """Propagate ``prev_mask`` from ``prev_image`` onto ``next_image``."""

    prev_image: Image
    next_image: Image
    prev_mask: Mask

    def __post_init__(self):
        shape = self.prev_image.pixels.shape[:2]
        if self.next_image.pixels.shape[:2] != shape or self.prev_mask.bits.shape != shape:
            raise ValueError("track request dimensions must all match")


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str  # "mock" | "http"
    endpoint: Optional[str] = None
    timeout: float = 30.0
    retries: int = 2
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if (self.endpoint is not None) != (self.kind == "http"):
            raise ValueError("endpoint must be present iff kind is http")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "timeout": self.timeout,
            "retries": self.retries,
            "max_in_flight": self.max_in_flight,
        }

    @staticmethod
    def from_json(doc: dict) -> "BackendDescriptor":
        return BackendDescriptor(
            kind=doc["kind"],
            endpoint=doc.get("endpoint"),
            timeout=doc.get("timeout", 30.0),
            retries=doc.get("retries", 2),
            max_in_flight=doc.get("max_in_flight", 4),
        )


@runtime_checkable
class Backend(Protocol):
    def inpaint(self, req: InpaintRequest) -> Image: ...

    def segment(self, req: SegmentRequest) -> list[tuple[Mask, float]]: ...

    def track(self, req: TrackRequest) -> Mask: ...

    def health(self) -> dict: ...


def inpaint(backend: Backend, req: InpaintRequest) -> Image:
    """Run inpainting with the unconditional outside-mask guarantee.

    Pixels outside the request mask are overwritten with the input image
    regardless of what the backend returned: real diffusion servers may
    perturb unmasked pixels, and the untouched scene must stay intact.
    """
    reply = backend.inpaint(req)
    if reply.pixels.shape != req.image.pixels.shape:
        raise BackendError(
            f"inpaint reply shape {reply.pixels.shape} does not match request "
            f"{req.image.pixels.shape}"
        )
    out = req.image.pixels.copy()
    out[req.mask.bits] = reply.pixels[req.mask.bits]
    return Image(out)


def segment(backend: Backend, req: SegmentRequest) -> list[tuple[Mask, float]]:
    results = backend.segment(req)
    shape = req.image.pixels.shape[:2]
    for mask, score in results:
        if mask.bits.shape != shape:
            raise BackendError(f"segment reply mask shape {mask.bits.shape} mismatch")
        if not (0.0 <= score <= 1.0):
            raise BackendError(f"segment score {score!r} outside [0, 1]")
    return sorted(results, key=lambda pair: -pair[1])


def track(backend: Backend, req: TrackRequest) -> Mask:
    reply = backend.track(req)
    if reply.bits.shape != req.next_image.pixels.shape[:2]:
        raise BackendError(f"track reply shape {reply.bits.shape} mismatch")
    return reply
