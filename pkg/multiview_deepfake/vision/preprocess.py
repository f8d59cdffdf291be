# Copyright 2025 Multiview DeepFake

"""Pré-calcul des vues sur disque pour tout un manifeste.

Sortie::

    out_dir/
      views.jsonl                       en-tête + un enregistrement par visage
      views/<stem>_f0_global.png
      views/<stem>_f0_middle.png
      views/<stem>_f0_local.png
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from pydantic import Field, ValidationError

from ..config import ALL_VIEWS, GeometryConfig, Label, MultiviewBaseModel, Split, ViewName, config_hash
from ..data.manifest import DatasetManifest, resolve_image_path
from ..errors import AnnotationParseError, GeometryError
from ..observability import get_logger
from .detection import FaceDetectorProvider, FaceRecord, SidecarFaceDetector, detect_faces
from .image import load_image, save_image
from .views import PadMetadata, extract_views

logger = get_logger(__name__)

INDEX_NAME = "views.jsonl"
INDEX_SCHEMA_VERSION = 1
VIEWS_DIR = "views"


class ViewRecord(MultiviewBaseModel):
    """Un visage prétraité : chemins des trois vues et métadonnées de padding."""

    image_path: str
    face_index: int = Field(default=0, ge=0)
    label: Label
    split: Split | None = None
    source_unit: str = ""
    pose_class: int | None = None
    face: FaceRecord
    views: dict[ViewName, str]
    pads: dict[ViewName, PadMetadata]


class ViewIndex(MultiviewBaseModel):
    schema_version: int = INDEX_SCHEMA_VERSION
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    geometry_hash: str = ""
    source: str = ""
    records: list[ViewRecord] = Field(default_factory=list)

    def split(self, split: Split | str) -> list[ViewRecord]:
        split = Split(split)
        return [r for r in self.records if r.split == split]


def write_view_index(index: ViewIndex, path: Path | str) -> Path:
    path = Path(path)
    header = index.model_dump(mode="json", exclude={"records"})
    tmp = path.with_name(f".{path.name}.tmp")
    with tmp.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header, ensure_ascii=False) + "\n")
        for record in index.records:
            f.write(json.dumps(record.model_dump(mode="json"), ensure_ascii=False) + "\n")
    os.replace(tmp, path)
    return path


def read_view_index(path: Path | str) -> ViewIndex:
    path = Path(path)
    if path.is_dir():
        path = path / INDEX_NAME
    if not path.exists():
        raise FileNotFoundError(f"Index de vues introuvable: {path}")
    with path.open(encoding="utf-8") as f:
        lines = [line for line in f]
    try:
        header = json.loads(lines[0]) if lines else None
        if not header:
            raise AnnotationParseError("Index de vues vide", path=path)
        records = []
        for line_number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                records.append(ViewRecord.model_validate_json(line))
            except ValidationError as exc:
                raise AnnotationParseError(
                    f"Enregistrement de vue invalide: {exc}", path=path, line_number=line_number
                ) from exc
        return ViewIndex(**header, records=records)
    except (json.JSONDecodeError, ValidationError, TypeError) as exc:
        raise AnnotationParseError(f"En-tête d'index invalide: {exc}", path=path, line_number=1) from exc


def preprocess_manifest(
    manifest: DatasetManifest,
    manifest_root: Path | str,
    out_dir: Path | str,
    geometry: GeometryConfig | None = None,
    provider: FaceDetectorProvider | None = None,
) -> ViewIndex:
    """Extrait et écrit les trois vues de chaque visage du manifeste.

    Les visages déjà annotés dans le manifeste sont utilisés tels quels ;
    sinon `provider` (par défaut le lecteur de sidecars) est interrogé.
    Un visage dont la géométrie est invalide est ignoré avec un avertissement.
    """
    geometry = geometry or GeometryConfig()
    provider = provider or SidecarFaceDetector()
    out_dir = Path(out_dir)
    views_dir = out_dir / VIEWS_DIR
    views_dir.mkdir(parents=True, exist_ok=True)

    records: list[ViewRecord] = []
    skipped = 0
    for entry in manifest.entries:
        image = load_image(resolve_image_path(entry, manifest_root))
        faces = entry.faces or detect_faces(image, provider)
        stem = Path(entry.image_path).stem
        for face_index, face in enumerate(faces):
            try:
                triple = extract_views(image, face, geometry)
            except GeometryError as exc:
                skipped += 1
                logger.warning(
                    "Visage ignoré (géométrie invalide)",
                    extra={"context": {"image": entry.image_path, "face": face_index, "error": str(exc)}},
                )
                continue
            paths: dict[ViewName, str] = {}
            for view in ALL_VIEWS:
                rel = f"{VIEWS_DIR}/{stem}_f{face_index}_{view.value}.png"
                save_image(triple.view(view), out_dir / rel)
                paths[view] = rel
            records.append(
                ViewRecord(
                    image_path=entry.image_path,
                    face_index=face_index,
                    label=entry.label,
                    split=entry.split,
                    source_unit=entry.unit,
                    pose_class=entry.pose_class,
                    face=face,
                    views=paths,
                    pads=triple.pads,
                )
            )

    index = ViewIndex(
        geometry=geometry,
        geometry_hash=config_hash(geometry),
        source=manifest.source,
        records=records,
    )
    write_view_index(index, out_dir / INDEX_NAME)
    logger.info(
        "Prétraitement terminé",
        extra={"context": {"faces": len(records), "skipped": skipped, "out_dir": str(out_dir)}},
    )
    return index
