# Copyright 2025 Multiview DeepFake

"""Sous-échantillonnage de vidéos : une image sur `stride`, à partir de l'image 0."""

from __future__ import annotations

from pathlib import Path

import cv2

from ..config import Label
from ..observability import get_logger
from ..vision.image import ImageBuffer, save_image
from .manifest import ManifestEntry

logger = get_logger(__name__)


def sample_frames(frame_count: int, stride: int = 10) -> list[int]:
    """Indices i < frame_count avec i ≡ 0 (mod stride), croissants."""
    if frame_count < 0:
        raise ValueError(f"frame_count doit être ≥ 0, reçu {frame_count}")
    if stride < 1:
        raise ValueError(f"stride doit être ≥ 1, reçu {stride}")
    return list(range(0, frame_count, stride))


def extract_video_frames(
    video_path: Path | str,
    out_dir: Path | str,
    label: Label | int,
    stride: int = 10,
) -> list[ManifestEntry]:
    """Décode une vidéo avec OpenCV et écrit les images retenues en PNG.

    Les entrées renvoyées ont pour unité source la vidéo elle-même, ce qui
    garde toutes ses images dans le même split.
    """
    video_path = Path(video_path)
    out_dir = Path(out_dir)
    capture = cv2.VideoCapture(str(video_path))
    if not capture.isOpened():
        raise FileNotFoundError(f"Vidéo illisible ou introuvable: {video_path}")
    try:
        frame_count = int(capture.get(cv2.CAP_PROP_FRAME_COUNT))
        wanted = set(sample_frames(frame_count, stride))
        entries: list[ManifestEntry] = []
        index = 0
        while True:
            ok, bgr = capture.read()
            if not ok:
                break
            # Le nombre d'images annoncé par le conteneur est parfois faux.
            if index in wanted or (index >= frame_count and index % stride == 0):
                name = f"{video_path.stem}_f{index:06d}.png"
                rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
                save_image(ImageBuffer(rgb), out_dir / name)
                entries.append(
                    ManifestEntry(
                        image_path=name,
                        label=Label(int(label)),
                        source_unit=video_path.stem,
                        frame_index=index,
                    )
                )
            index += 1
    finally:
        capture.release()
    logger.info(
        "Images extraites",
        extra={"context": {"video": str(video_path), "decoded": index, "kept": len(entries)}},
    )
    return entries
