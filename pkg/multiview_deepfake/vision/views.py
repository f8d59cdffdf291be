# Copyright 2025 Multiview DeepFake

"""Extraction des trois vues d'un visage (globale, médiane, locale).

    vue médiane  = boîte du détecteur
    vue locale   = enveloppe convexe des 5 repères dilatée de `margin` px
    vue globale  = vue médiane élargie de `expand` px, bornée à l'image

Chaque région est rognée puis redimensionnée (côté le plus long → `side`,
interpolation bilinéaire) et complétée de zéros, centrée.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from pydantic import Field

from ..config import GeometryConfig, MultiviewBaseModel, ViewName
from ..errors import EmptyCropError
from .detection import FaceRecord
from .geometry import BoundingBox, global_region, local_region
from .image import ImageBuffer


class PadMetadata(MultiviewBaseModel):
    """Tout ce qu'il faut pour inverser le passage image source → vue."""

    side: int
    scale: float = Field(gt=0)
    crop_width: int
    crop_height: int
    content_width: int
    content_height: int
    pad_left: int
    pad_top: int
    pad_right: int
    pad_bottom: int
    origin_x: int = 0
    origin_y: int = 0

    @property
    def scale_x(self) -> float:
        return self.content_width / self.crop_width

    @property
    def scale_y(self) -> float:
        return self.content_height / self.crop_height

    def to_view(self, x: float, y: float) -> tuple[float, float]:
        """Coordonnées image source → coordonnées dans la vue."""
        return (
            (x - self.origin_x) * self.scale_x + self.pad_left,
            (y - self.origin_y) * self.scale_y + self.pad_top,
        )

    def to_source(self, u: float, v: float) -> tuple[float, float]:
        return (
            (u - self.pad_left) / self.scale_x + self.origin_x,
            (v - self.pad_top) / self.scale_y + self.origin_y,
        )

    def content_slice(self) -> tuple[slice, slice]:
        return (
            slice(self.pad_top, self.pad_top + self.content_height),
            slice(self.pad_left, self.pad_left + self.content_width),
        )


@dataclass(frozen=True, eq=False)
class ViewTriple:
    global_view: ImageBuffer
    middle_view: ImageBuffer
    local_view: ImageBuffer
    pads: dict[ViewName, PadMetadata] = field(default_factory=dict)
    regions: dict[ViewName, BoundingBox] = field(default_factory=dict)

    def view(self, name: ViewName | str) -> ImageBuffer:
        return {
            ViewName.GLOBAL: self.global_view,
            ViewName.MIDDLE: self.middle_view,
            ViewName.LOCAL: self.local_view,
        }[ViewName(name)]

    def same_pixels(self, other: ViewTriple) -> bool:
        return all(self.view(v).same_pixels(other.view(v)) for v in ViewName)


def crop_bounds(image: ImageBuffer, box: BoundingBox) -> tuple[int, int, int, int]:
    """Rastérise `box` vers l'extérieur puis la borne à l'image."""
    ix0, iy0, ix1, iy1 = box.rasterize()
    ix0, iy0 = max(ix0, 0), max(iy0, 0)
    ix1, iy1 = min(ix1, image.width), min(iy1, image.height)
    if ix0 >= ix1 or iy0 >= iy1:
        raise EmptyCropError(
            f"La boîte {box.to_list()} est hors de l'image {image.width}x{image.height}"
        )
    return ix0, iy0, ix1, iy1


def crop(image: ImageBuffer, box: BoundingBox) -> ImageBuffer:
    """Copie exacte des pixels de `box` ; la partie hors image n'est jamais lue."""
    ix0, iy0, ix1, iy1 = crop_bounds(image, box)
    return ImageBuffer(image.pixels[iy0:iy1, ix0:ix1].copy(), source=image.source)


def resize_pad(crop_image: ImageBuffer, side: int = 224) -> tuple[ImageBuffer, PadMetadata]:
    """Redimensionne en conservant le rapport d'aspect puis complète de zéros, centré."""
    w, h = crop_image.width, crop_image.height
    scale = side / max(w, h)
    content_w = min(side, max(1, round(w * scale)))
    content_h = min(side, max(1, round(h * scale)))
    if (content_w, content_h) == (w, h):
        content = crop_image.pixels
    else:
        content = cv2.resize(
            crop_image.pixels, (content_w, content_h), interpolation=cv2.INTER_LINEAR
        )
    pad_left = (side - content_w) // 2
    pad_top = (side - content_h) // 2
    canvas = np.zeros((side, side, 3), dtype=np.uint8)
    canvas[pad_top : pad_top + content_h, pad_left : pad_left + content_w] = content
    meta = PadMetadata(
        side=side,
        scale=scale,
        crop_width=w,
        crop_height=h,
        content_width=content_w,
        content_height=content_h,
        pad_left=pad_left,
        pad_top=pad_top,
        pad_right=side - content_w - pad_left,
        pad_bottom=side - content_h - pad_top,
    )
    return ImageBuffer(canvas, source=crop_image.source), meta


def _view_from_region(
    image: ImageBuffer, region: BoundingBox, side: int
) -> tuple[ImageBuffer, PadMetadata]:
    ix0, iy0, _, _ = crop_bounds(image, region)
    view, meta = resize_pad(crop(image, region), side=side)
    return view, meta.model_copy(update={"origin_x": ix0, "origin_y": iy0})


def extract_views(
    image: ImageBuffer,
    face: FaceRecord,
    geometry: GeometryConfig | None = None,
) -> ViewTriple:
    """Compose les trois vues 224×224 d'un visage (déterministe)."""
    geometry = geometry or GeometryConfig()
    middle = face.box
    local = local_region(face.landmarks, margin=geometry.margin)
    global_ = global_region(middle, expand=geometry.expand, image=image)
    regions = {ViewName.GLOBAL: global_, ViewName.MIDDLE: middle, ViewName.LOCAL: local}
    views: dict[ViewName, ImageBuffer] = {}
    pads: dict[ViewName, PadMetadata] = {}
    for name, region in regions.items():
        views[name], pads[name] = _view_from_region(image, region, geometry.side)
    return ViewTriple(
        global_view=views[ViewName.GLOBAL],
        middle_view=views[ViewName.MIDDLE],
        local_view=views[ViewName.LOCAL],
        pads=pads,
        regions=regions,
    )
