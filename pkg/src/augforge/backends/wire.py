"""Wire protocol: JSON bodies with base64-encoded PNG image fields.

Endpoints::

    POST /v1/inpaint  {image, mask, depth?, prompt, seed, mode} -> 200 {image}
    POST /v1/segment  {image, point?: {x, y}}                   -> 200 {masks, scores}
    POST /v1/track    {prev_image, next_image, prev_mask}       -> 200 {mask}
    GET  /v1/health                                             -> 200 {name, version, modes}

Images travel as 8-bit RGB PNG, masks as 8-bit grayscale PNG (255 =
member), depth as 16-bit grayscale PNG millimeters. The 64-bit seed is a
decimal string because JSON numbers are IEEE doubles and cannot carry a
full uint64. Unknown JSON fields are ignored on both sides. Error replies
are 4xx/5xx with a JSON body {error}.
"""

from __future__ import annotations

import base64

import numpy as np

from augforge import png_io
from augforge.types import DepthMap, Image, Mask
from augforge.backends.base import (
    MODE_DEPTH_GUIDED,
    InpaintRequest,
    SegmentRequest,
    TrackRequest,
)

INPAINT_PATH = "/v1/inpaint"
SEGMENT_PATH = "/v1/segment"
TRACK_PATH = "/v1/track"
HEALTH_PATH = "/v1/health"


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


def encode_image(image: Image) -> str:
    return _b64(png_io.encode_rgb(image.pixels))


def decode_image(text: str) -> Image:
    return Image(png_io.decode_rgb(_unb64(text)))


def encode_mask(mask: Mask) -> str:
    return _b64(png_io.encode_mask(mask.bits))


def decode_mask(text: str) -> Mask:
    return Mask(png_io.decode_mask(_unb64(text)))


def encode_depth(depth: DepthMap) -> str:
    return _b64(png_io.encode_depth(depth.values))


def decode_depth(text: str) -> DepthMap:
    return DepthMap(png_io.decode_depth(_unb64(text)))


# -- requests ------------------------------------------------------------


def inpaint_request_to_json(req: InpaintRequest) -> dict:
    doc = {
        "image": encode_image(req.image),
        "mask": encode_mask(req.mask),
        "prompt": req.prompt,
        "seed": str(req.seed),
        "mode": req.mode,
    }
    if req.depth is not None:
        doc["depth"] = encode_depth(req.depth)
    return doc


def inpaint_request_from_json(doc: dict) -> InpaintRequest:
    mode = doc.get("mode", "inpaint")
    depth = decode_depth(doc["depth"]) if mode == MODE_DEPTH_GUIDED else None
    return InpaintRequest(
        image=decode_image(doc["image"]),
        mask=decode_mask(doc["mask"]),
        prompt=doc["prompt"],
        seed=int(str(doc["seed"])),
        mode=mode,
        depth=depth,
    )


def segment_request_to_json(req: SegmentRequest) -> dict:
    doc = {"image": encode_image(req.image)}
    if req.point is not None:
        doc["point"] = {"x": req.point[0], "y": req.point[1]}
    return doc


def segment_request_from_json(doc: dict) -> SegmentRequest:
    point = None
    if doc.get("point") is not None:
        point = (int(doc["point"]["x"]), int(doc["point"]["y"]))
    return SegmentRequest(image=decode_image(doc["image"]), point=point)


def track_request_to_json(req: TrackRequest) -> dict:
    return {
        "prev_image": encode_image(req.prev_image),
        "next_image": encode_image(req.next_image),
        "prev_mask": encode_mask(req.prev_mask),
    }


def track_request_from_json(doc: dict) -> TrackRequest:
    return TrackRequest(
        prev_image=decode_image(doc["prev_image"]),
        next_image=decode_image(doc["next_image"]),
        prev_mask=decode_mask(doc["prev_mask"]),
    )


# -- responses -----------------------------------------------------------


def inpaint_response_to_json(image: Image) -> dict:
    return {"image": encode_image(image)}


def inpaint_response_from_json(doc: dict) -> Image:
    return decode_image(doc["image"])


def segment_response_to_json(results: list) -> dict:
    return {
        "masks": [encode_mask(mask) for mask, _ in results],
        "scores": [float(score) for _, score in results],
    }


def segment_response_from_json(doc: dict) -> list:
    masks = [decode_mask(m) for m in doc.get("masks", [])]
    scores = [float(s) for s in doc.get("scores", [])]
    if len(masks) != len(scores):
        raise ValueError(
            f"segment reply has {len(masks)} masks but {len(scores)} scores"
        )
    return list(zip(masks, scores))


def track_response_to_json(mask: Mask) -> dict:
    return {"mask": encode_mask(mask)}


def track_response_from_json(doc: dict) -> Mask:
    return decode_mask(doc["mask"])
