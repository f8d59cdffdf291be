# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Hiérarchie d'exceptions du détecteur multi-vues.

Les erreurs « de valeur » dérivent aussi de `ValueError`, les erreurs
d'exécution de `RuntimeError`, pour rester attrapables par du code générique.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any


class MultiviewError(Exception):
    """Racine de toutes les erreurs du projet."""


class ConfigError(MultiviewError, ValueError):
    """Configuration invalide ou dimensions incohérentes."""


# ── Géométrie ─────────────────────────────────────────────────────────────────


class GeometryError(MultiviewError, ValueError):
    """Boîte ou points invalides."""


class DegenerateGeometryError(GeometryError):
    """Points de repère confondus : aucune enveloppe exploitable."""


class EmptyCropError(GeometryError):
    """La boîte demandée ne recouvre aucun pixel de l'image."""


# ── Détection / annotations ───────────────────────────────────────────────────


class AnnotationParseError(MultiviewError, ValueError):
    """Ligne d'annotation (sidecar ou manifeste) illisible."""

    def __init__(self, message: str, path: Path | str | None = None, line_number: int | None = None):
        self.path = str(path) if path is not None else None
        self.line_number = line_number
        where = ""
        if self.path is not None:
            where = f" ({self.path}"
            where += f", ligne {line_number})" if line_number is not None else ")"
        super().__init__(f"{message}{where}")


class DetectionError(MultiviewError, RuntimeError):
    """Échec du fournisseur de détection de visages."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


# ── Modèle / checkpoints ──────────────────────────────────────────────────────


class CheckpointError(MultiviewError, RuntimeError):
    """Problème de lecture ou d'écriture d'un checkpoint."""


class IncompatibleCheckpointError(CheckpointError):
    def __init__(self, message: str, tensor_name: str | None = None):
        self.tensor_name = tensor_name
        super().__init__(message)


class CorruptCheckpointError(CheckpointError):
    """Fichier tronqué ou conteneur illisible."""


class UnsupportedVersionError(CheckpointError):
    def __init__(self, found: Any, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(
            f"Version de checkpoint non supportée: {found!r} (attendue: {supported})"
        )


class NumericFaultError(MultiviewError, RuntimeError):
    """Valeur non finie (NaN/inf) détectée pendant un calcul."""

    def __init__(
        self,
        location: str,
        batch_index: int | None = None,
        epoch: int | None = None,
    ):
        self.location = location
        self.batch_index = batch_index
        self.epoch = epoch
        details = [f"emplacement={location}"]
        if epoch is not None:
            details.append(f"epoch={epoch}")
        if batch_index is not None:
            details.append(f"batch={batch_index}")
        super().__init__(f"Valeur non finie détectée ({', '.join(details)})")


# ── Données / entraînement / évaluation ───────────────────────────────────────


class InsufficientDataError(MultiviewError, ValueError):
    """Pas assez d'exemples pour la découpe demandée."""


class MissingPoseClassesError(MultiviewError, ValueError):
    def __init__(self, missing: list[int]):
        self.missing = sorted(missing)
        super().__init__(f"Classes de pose absentes du jeu de données: {self.missing}")


class MetricError(MultiviewError, ValueError):
    """Métrique non définie sur l'échantillon fourni."""


class UnsupportedLayerError(MultiviewError, ValueError):
    """Couche sans grille spatiale : Grad-CAM impossible."""
