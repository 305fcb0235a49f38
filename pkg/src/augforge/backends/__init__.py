"""Generative service backends: contracts, deterministic mock, HTTP client."""

from augforge.backends.base import (
    Backend,
    BackendDescriptor,
    BackendError,
    InpaintRequest,
    SegmentRequest,
    ServerError,
    TrackRequest,
    TransportError,
    inpaint,
    segment,
    track,
)
from augforge.backends.mock import MockBackend


def get_backend(descriptor: BackendDescriptor) -> Backend:
    if descriptor.kind == "mock":
        return MockBackend()
    from augforge.backends.http import HttpBackend

    return HttpBackend(descriptor)


__all__ = [
    "Backend",
    "BackendDescriptor",
    "BackendError",
    "InpaintRequest",
    "SegmentRequest",
    "ServerError",
    "TrackRequest",
    "TransportError",
    "inpaint",
    "segment",
    "track",
    "MockBackend",
    "get_backend",
]
