"""HTTP client for remote generation/segmentation/tracking services.

Retries apply to transport failures (connection errors, timeouts) only;
an HTTP error status is surfaced immediately. A semaphore bounds the
number of concurrent in-flight requests per backend handle.
"""

from __future__ import annotations

import threading

import requests

from augforge.types import Image, Mask
from augforge.backends import wire
from augforge.backends.base import (
    BackendDescriptor,
    InpaintRequest,
    SegmentRequest,
    ServerError,
    TrackRequest,
    TransportError,
)


class HttpBackend:
    def __init__(self, descriptor: BackendDescriptor):
        if descriptor.kind != "http":
            raise ValueError("HttpBackend needs an http descriptor")
        self.descriptor = descriptor
        self._base = descriptor.endpoint.rstrip("/")
        self._session = requests.Session()
        self._slots = threading.Semaphore(descriptor.max_in_flight)

    def _request(self, method: str, path: str, payload=None) -> dict:
        attempts = self.descriptor.retries + 1
        last_exc = None
        with self._slots:
            for _ in range(attempts):
                try:
                    resp = self._session.request(
                        method,
                        self._base + path,
                        json=payload,
                        timeout=self.descriptor.timeout,
                    )
                except (requests.ConnectionError, requests.Timeout) as exc:
                    last_exc = exc
                    continue
                if resp.status_code != 200:
                    try:
                        message = resp.json().get("error", resp.text)
                    except ValueError:
                        message = resp.text
                    raise ServerError(resp.status_code, message)
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ServerError(200, f"non-JSON reply: {exc}") from exc
        raise TransportError(
            f"{method} {path} failed after {attempts} attempts: {last_exc}"
        )

    def health(self) -> dict:
        return self._request("GET", wire.HEALTH_PATH)

    def inpaint(self, req: InpaintRequest) -> Image:
        doc = self._request("POST", wire.INPAINT_PATH, wire.inpaint_request_to_json(req))
        return wire.inpaint_response_from_json(doc)

    def segment(self, req: SegmentRequest) -> list[tuple[Mask, float]]:
        doc = self._request("POST", wire.SEGMENT_PATH, wire.segment_request_to_json(req))
        return wire.segment_response_from_json(doc)

    def track(self, req: TrackRequest) -> Mask:
        doc = self._request("POST", wire.TRACK_PATH, wire.track_request_to_json(req))
        return wire.track_response_from_json(doc)
