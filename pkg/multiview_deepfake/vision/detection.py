# Copyright 2025 Multiview DeepFake

"""Détection de visages par fournisseur enfichable.

Le dépôt ne livre pas de détecteur neuronal : `SidecarFaceDetector` lit les
boîtes et repères dans un fichier d'annotation voisin de l'image.

Format sidecar (JSON lines, un visage par ligne), pour ``X.png`` → ``X.faces.jsonl``:
    {"image": "X.png", "box": [x0, y0, x1, y1],
     "landmarks": [[x, y], ×5], "confidence": 0.99}
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path

from pydantic import Field, ValidationError

from ..config import MultiviewBaseModel
from ..errors import AnnotationParseError, DetectionError, GeometryError
from ..observability import get_logger
from .geometry import BoundingBox, FaceLandmarks
from .image import ImageBuffer

logger = get_logger(__name__)

SIDECAR_SUFFIX = ".faces.jsonl"
GATE_FRACTION = 0.25


class FaceRecord(MultiviewBaseModel):
    """Un visage détecté : boîte, cinq repères et provenance."""

    box: BoundingBox
    landmarks: FaceLandmarks
    source_image: str = ""
    detector_confidence: float = Field(default=1.0, ge=0.0, le=1.0)

    @property
    def outside_gate(self) -> bool:
        """Vrai si un repère sort de la boîte élargie de 25 % de sa diagonale."""
        gate = self.box.expanded(GATE_FRACTION * self.box.diagonal)
        return any(not gate.contains_point(p.x, p.y) for p in self.landmarks.points())

    def to_sidecar(self) -> dict:
        return {
            "image": self.source_image,
            "box": self.box.to_list(),
            "landmarks": self.landmarks.to_list(),
            "confidence": self.detector_confidence,
        }


def sidecar_path(image_path: Path | str) -> Path:
    image_path = Path(image_path)
    return image_path.with_name(image_path.stem + SIDECAR_SUFFIX)


def parse_sidecar(path: Path | str) -> list[FaceRecord]:
    """Lit un fichier sidecar ; toute ligne invalide lève une erreur avec son numéro."""
    path = Path(path)
    records: list[FaceRecord] = []
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                record = FaceRecord(
                    box=BoundingBox.from_list(row["box"]),
                    landmarks=FaceLandmarks.from_array(row["landmarks"]),
                    source_image=str(row.get("image", "")),
                    detector_confidence=float(row.get("confidence", 1.0)),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValidationError, GeometryError) as exc:
                raise AnnotationParseError(
                    f"Annotation de visage invalide: {exc}", path=path, line_number=line_number
                ) from exc
            if record.landmarks.is_degenerate:
                raise AnnotationParseError(
                    "Repères dégénérés (moins de deux points distincts)",
                    path=path,
                    line_number=line_number,
                )
            records.append(record)
    return records


def write_sidecar(path: Path | str, faces: Sequence[FaceRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for face in faces:
            f.write(json.dumps(face.to_sidecar(), ensure_ascii=False) + "\n")
    return path


class FaceDetectorProvider(ABC):
    """Interface d'un détecteur de visages (boîte + cinq repères)."""

    name: str = "provider"

    @abstractmethod
    def detect(self, image: ImageBuffer) -> list[FaceRecord]:
        """Retourne les visages détectés dans l'image."""


class SidecarFaceDetector(FaceDetectorProvider):
    """Fournisseur de test : lit ``<image>.faces.jsonl`` à côté de l'image."""

    name = "sidecar"

    def __init__(self, annotation_dir: Path | str | None = None, missing_ok: bool = True):
        self.annotation_dir = Path(annotation_dir) if annotation_dir else None
        self.missing_ok = missing_ok

    def _locate(self, image: ImageBuffer) -> Path:
        if not image.source:
            raise DetectionError(
                "Image sans chemin source : impossible de localiser le sidecar",
                diagnostics={"provider": self.name},
            )
        path = sidecar_path(image.source)
        if self.annotation_dir is not None:
            path = self.annotation_dir / path.name
        return path

    def detect(self, image: ImageBuffer) -> list[FaceRecord]:
        path = self._locate(image)
        if not path.exists():
            if self.missing_ok:
                return []
            raise DetectionError(
                f"Sidecar introuvable: {path}",
                diagnostics={"provider": self.name, "path": str(path)},
            )
        faces = parse_sidecar(path)
        for face in faces:
            if not face.source_image:
                face.source_image = image.source or ""
        return faces


def detect_faces(image: ImageBuffer, provider: FaceDetectorProvider) -> list[FaceRecord]:
    """Détecte les visages via `provider` et signale ceux hors de la porte de cohérence."""
    try:
        faces = provider.detect(image)
    except (AnnotationParseError, DetectionError):
        raise
    except Exception as exc:
        raise DetectionError(
            f"Échec du détecteur {provider.name}: {exc}",
            diagnostics={
                "provider": provider.name,
                "image": image.source,
                "error": repr(exc),
            },
        ) from exc
    for index, face in enumerate(faces):
        if face.outside_gate:
            logger.warning(
                "Repère hors de la boîte élargie de 25 %",
                extra={"context": {"image": image.source, "face": index, "box": face.box.to_list()}},
            )
    return faces
