# Copyright 2025 Multiview DeepFake

"""Tampon d'image RGB 8 bits et entrées/sorties disque."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from ..errors import GeometryError


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Image RGB ``(hauteur, largeur, 3)`` en uint8, ligne par ligne."""

    pixels: np.ndarray
    source: str | None = None

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.dtype != np.uint8:
            raise GeometryError("ImageBuffer attend un tableau numpy uint8")
        if px.ndim != 3 or px.shape[2] != 3:
            raise GeometryError(f"ImageBuffer attend une forme (H, W, 3), reçu {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise GeometryError(f"Image vide: {px.shape}")
        if not px.flags["C_CONTIGUOUS"]:
            object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def channels(self) -> int:
        return 3

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        r, g, b = self.pixels[y, x]
        return int(r), int(g), int(b)

    def copy(self) -> ImageBuffer:
        return ImageBuffer(self.pixels.copy(), source=self.source)

    def same_pixels(self, other: ImageBuffer) -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    @classmethod
    def zeros(cls, width: int, height: int) -> ImageBuffer:
        return cls(np.zeros((height, width, 3), dtype=np.uint8))


def load_image(path: Path | str) -> ImageBuffer:
    """Charge une image disque en RGB."""
    path = Path(path)
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise FileNotFoundError(f"Image illisible ou introuvable: {path}")
    return ImageBuffer(cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB), source=str(path))


def save_image(image: ImageBuffer | np.ndarray, path: Path | str) -> Path:
    """Écrit une image PNG de façon atomique (fichier temporaire + rename)."""
    path = Path(path)
    pixels = image.pixels if isinstance(image, ImageBuffer) else image
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.stem}.tmp{path.suffix or '.png'}")
    ok = cv2.imwrite(str(tmp), cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR))
    if not ok:
        raise OSError(f"Écriture d'image impossible: {path}")
    os.replace(tmp, path)
    return path
