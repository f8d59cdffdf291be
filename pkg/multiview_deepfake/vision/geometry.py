# Copyright 2025 Multiview DeepFake

"""Géométrie des vues : points de repère, boîtes, enveloppe convexe.

Conventions:
    - coordonnées en pixels flottants, origine en haut à gauche ;
    - une boîte (x0, y0, x1, y1) est semi-ouverte côté max une fois rastérisée ;
    - la rastérisation arrondit vers l'extérieur (floor des min, ceil des max).
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import cv2
import numpy as np
from pydantic import ConfigDict, FiniteFloat, model_validator

from ..config import MultiviewBaseModel
from ..errors import DegenerateGeometryError, GeometryError
from .image import ImageBuffer

LANDMARK_NAMES = ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right")


class Point2(MultiviewBaseModel):
    model_config = ConfigDict(frozen=True)

    x: FiniteFloat
    y: FiniteFloat

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


class FaceLandmarks(MultiviewBaseModel):
    """Les cinq points de repère : deux yeux, le nez, deux coins de bouche."""

    model_config = ConfigDict(frozen=True)

    left_eye: Point2
    right_eye: Point2
    nose: Point2
    mouth_left: Point2
    mouth_right: Point2

    def points(self) -> list[Point2]:
        return [getattr(self, name) for name in LANDMARK_NAMES]

    def as_array(self) -> np.ndarray:
        return np.array([p.as_tuple() for p in self.points()], dtype=np.float64)

    @classmethod
    def from_array(cls, coords: Sequence[Sequence[float]] | np.ndarray) -> FaceLandmarks:
        arr = np.asarray(coords, dtype=np.float64)
        if arr.shape != (5, 2):
            raise GeometryError(f"5 points (x, y) attendus, reçu une forme {arr.shape}")
        return cls(
            **{
                name: Point2(x=float(arr[i, 0]), y=float(arr[i, 1]))
                for i, name in enumerate(LANDMARK_NAMES)
            }
        )

    def to_list(self) -> list[list[float]]:
        return [[p.x, p.y] for p in self.points()]

    def distinct_points(self) -> list[tuple[float, float]]:
        return sorted({p.as_tuple() for p in self.points()})

    @property
    def is_degenerate(self) -> bool:
        return len(self.distinct_points()) < 2

    def translated(self, dx: float, dy: float) -> FaceLandmarks:
        return FaceLandmarks.from_array(self.as_array() + np.array([dx, dy]))


class BoundingBox(MultiviewBaseModel):
    model_config = ConfigDict(frozen=True)

    x0: FiniteFloat
    y0: FiniteFloat
    x1: FiniteFloat
    y1: FiniteFloat

    @model_validator(mode="after")
    def _check_order(self) -> BoundingBox:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(
                f"boîte invalide ({self.x0}, {self.y0}, {self.x1}, {self.y1}): x0<x1 et y0<y1 requis"
            )
        return self

    @classmethod
    def from_list(cls, values: Sequence[float]) -> BoundingBox:
        if len(values) != 4:
            raise GeometryError(f"4 valeurs [x0, y0, x1, y1] attendues, reçu {len(values)}")
        x0, y0, x1, y1 = (float(v) for v in values)
        return cls(x0=x0, y0=y0, x1=x1, y1=y1)

    def to_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def rasterize(self) -> tuple[int, int, int, int]:
        return (
            math.floor(self.x0),
            math.floor(self.y0),
            math.ceil(self.x1),
            math.ceil(self.y1),
        )

    def expanded(self, amount: float) -> BoundingBox:
        return BoundingBox(
            x0=self.x0 - amount,
            y0=self.y0 - amount,
            x1=self.x1 + amount,
            y1=self.y1 + amount,
        )

    def translated(self, dx: float, dy: float) -> BoundingBox:
        return BoundingBox(x0=self.x0 + dx, y0=self.y0 + dy, x1=self.x1 + dx, y1=self.y1 + dy)

    def clipped(self, width: float, height: float) -> BoundingBox | None:
        """Intersection avec [0, width] × [0, height] ; None si vide."""
        x0, y0 = max(self.x0, 0.0), max(self.y0, 0.0)
        x1, y1 = min(self.x1, float(width)), min(self.y1, float(height))
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0=x0, y0=y0, x1=x1, y1=y1)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def contains_box(self, other: BoundingBox) -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )


def convex_hull(points: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Enveloppe convexe (``cv2.convexHull``), sommets sans points colinéaires.

    Les sommets renvoyés sont les points d'entrée eux-mêmes (double précision).
    Un nuage colinéaire donne ses deux extrémités, un point unique lui-même.
    """
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    if _is_collinear(pts):
        return [pts[0], pts[-1]]
    array = np.asarray(pts, dtype=np.float32).reshape(-1, 1, 2)
    indices = cv2.convexHull(array, clockwise=False, returnPoints=False).ravel()
    return [pts[int(i)] for i in indices]


def _is_collinear(pts: Sequence[tuple[float, float]]) -> bool:
    (x0, y0), (x1, y1) = pts[0], pts[-1]
    return all(abs((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)) <= 1e-9 for x, y in pts)


def local_region(landmarks: FaceLandmarks, margin: float = 15.0) -> BoundingBox:
    """Boîte englobante de l'enveloppe convexe des repères dilatée de `margin`.

    Dilater un polygone convexe d'un disque de rayon `margin` agrandit sa boîte
    englobante d'exactement `margin` de chaque côté.
    """
    distinct = landmarks.distinct_points()
    if len(distinct) < 2:
        raise DegenerateGeometryError("Les cinq points de repère sont confondus")
    hull = convex_hull(distinct)
    xs = [p[0] for p in hull]
    ys = [p[1] for p in hull]
    x0, y0 = min(xs) - margin, min(ys) - margin
    x1, y1 = max(xs) + margin, max(ys) + margin
    if not (x0 < x1 and y0 < y1):
        raise DegenerateGeometryError(
            f"Région locale d'aire nulle (repères alignés, marge {margin})"
        )
    return BoundingBox(x0=x0, y0=y0, x1=x1, y1=y1)


def global_region(
    middle: BoundingBox,
    expand: float = 20.0,
    image: ImageBuffer | tuple[int, int] | None = None,
) -> BoundingBox:
    """Vue médiane élargie de `expand` pixels dans chaque direction, puis bornée à l'image.

    `image` peut être un `ImageBuffer` ou un couple (largeur, hauteur).
    """
    grown = middle.expanded(expand)
    if image is None:
        return grown
    width, height = (image.width, image.height) if isinstance(image, ImageBuffer) else image
    clipped = grown.clipped(width, height)
    if clipped is None:
        raise GeometryError(
            f"La boîte {middle.to_list()} ne recouvre pas l'image {width}x{height}"
        )
    return clipped


def hull_mask(
    landmarks: FaceLandmarks,
    shape: tuple[int, int],
    margin: float = 0.0,
) -> np.ndarray:
    """Masque booléen (H, W) de l'enveloppe des repères, dilatée d'un disque de rayon `margin`."""
    height, width = shape
    mask = np.zeros((height, width), dtype=np.uint8)
    hull = convex_hull(landmarks.distinct_points())
    vertices = np.round(np.asarray(hull, dtype=np.float64)).astype(np.int32)
    if len(vertices) >= 3:
        cv2.fillConvexPoly(mask, vertices, 1)
    elif len(vertices) == 2:
        cv2.line(mask, tuple(map(int, vertices[0])), tuple(map(int, vertices[1])), 1, 1)
    else:
        x, y = vertices[0]
        if 0 <= x < width and 0 <= y < height:
            mask[y, x] = 1
    radius = int(round(margin))
    if radius > 0:
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * radius + 1, 2 * radius + 1))
        mask = cv2.dilate(mask, kernel)
    return mask.astype(bool)
