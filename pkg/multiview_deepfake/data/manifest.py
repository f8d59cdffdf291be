# Copyright 2025 Multiview DeepFake

"""Manifeste de jeu de données (JSON lines, UTF-8, schéma versionné).

Format:
    ligne 1   : {"schema_version": 1, "seed": 7, "source": "synthetic:..."}
    lignes 2+ : {"image_path": "images/fake_0003.png", "label": 1, "split": "train",
                 "faces": [...], "source_unit": "fake_0003", "pose_class": 4,
                 "frame_index": null}

Les chemins relatifs sont résolus par rapport au dossier du manifeste.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from pathlib import Path

from pydantic import Field, ValidationError, field_validator, model_validator

from ..config import POSE_CLASS_COUNT, Label, MultiviewBaseModel, Split
from ..errors import AnnotationParseError
from ..vision.detection import FaceRecord

MANIFEST_SCHEMA_VERSION = 1


class ManifestEntry(MultiviewBaseModel):
    image_path: str
    label: Label
    split: Split | None = None
    faces: list[FaceRecord] = Field(default_factory=list)
    source_unit: str = ""
    pose_class: int | None = None
    frame_index: int | None = Field(default=None, ge=0)

    @field_validator("pose_class")
    @classmethod
    def _check_pose(cls, v: int | None) -> int | None:
        if v is not None and not 0 <= v < POSE_CLASS_COUNT:
            raise ValueError(f"classe de pose hors de [0, {POSE_CLASS_COUNT - 1}]: {v}")
        return v

    @property
    def unit(self) -> str:
        """Unité de découpe (vidéo ou item synthétique) ; par défaut l'image elle-même."""
        return self.source_unit or self.image_path


class DatasetManifest(MultiviewBaseModel):
    schema_version: int = MANIFEST_SCHEMA_VERSION
    seed: int = 0
    source: str = ""
    entries: list[ManifestEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_paths(self) -> DatasetManifest:
        counts = Counter(e.image_path for e in self.entries)
        duplicates = sorted(p for p, n in counts.items() if n > 1)
        if duplicates:
            raise ValueError(f"chemins dupliqués dans le manifeste: {duplicates[:5]}")
        return self

    def split(self, split: Split | str) -> list[ManifestEntry]:
        split = Split(split)
        return [e for e in self.entries if e.split == split]

    def split_counts(self) -> dict[str, dict[int, int]]:
        """{split: {label: effectif}}"""
        counts: dict[str, dict[int, int]] = {s.value: {0: 0, 1: 0} for s in Split}
        for e in self.entries:
            if e.split is not None:
                counts[e.split.value][int(e.label)] += 1
        return counts


def write_manifest(manifest: DatasetManifest, path: Path | str) -> Path:
    """Écrit le manifeste de façon atomique (fichier temporaire + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "schema_version": manifest.schema_version,
        "seed": manifest.seed,
        "source": manifest.source,
    }
    tmp = path.with_name(f".{path.name}.tmp")
    with tmp.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header, ensure_ascii=False) + "\n")
        for entry in manifest.entries:
            f.write(json.dumps(entry.model_dump(mode="json"), ensure_ascii=False) + "\n")
    os.replace(tmp, path)
    return path


def read_manifest(path: Path | str) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifeste introuvable: {path}")
    header: dict | None = None
    entries: list[ManifestEntry] = []
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            try:
                row = json.loads(line)
                if header is None:
                    header = row
                    version = header.get("schema_version")
                    if version != MANIFEST_SCHEMA_VERSION:
                        raise AnnotationParseError(
                            f"Version de schéma non supportée: {version!r}",
                            path=path,
                            line_number=line_number,
                        )
                    continue
                entries.append(ManifestEntry.model_validate(row))
            except (json.JSONDecodeError, ValidationError, AttributeError) as exc:
                raise AnnotationParseError(
                    f"Entrée de manifeste invalide: {exc}", path=path, line_number=line_number
                ) from exc
    if header is None:
        raise AnnotationParseError("Manifeste vide (en-tête manquant)", path=path)
    try:
        return DatasetManifest(
            schema_version=header["schema_version"],
            seed=int(header.get("seed", 0)),
            source=str(header.get("source", "")),
            entries=entries,
        )
    except ValidationError as exc:
        raise AnnotationParseError(f"Manifeste invalide: {exc}", path=path) from exc


def resolve_image_path(entry: ManifestEntry, root: Path | str) -> Path:
    path = Path(entry.image_path)
    return path if path.is_absolute() else Path(root) / path
