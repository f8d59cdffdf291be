# Copyright 2025 Multiview DeepFake

"""Conteneur de checkpoint versionné.

Contenu (``torch.save`` d'un dict)::

    {"format_version": 1, "kind": "detector" | "pose-encoder",
     "config": {...}, "config_hash": "…", "state_dict": {...}, "extra": {...},
     "geometry": {...} | None}

``geometry`` est la géométrie des vues de l'entraînement ; l'inférence la
reprend par défaut.

La lecture se fait avec ``weights_only=True`` : seuls des tenseurs et des
types JSON simples sont acceptés.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Any

import torch
from pydantic import ValidationError
from torch import nn

from ..config import BackboneSpec, GeometryConfig, ModelConfig, config_hash
from ..errors import CorruptCheckpointError, IncompatibleCheckpointError, UnsupportedVersionError
from ..observability import get_logger
from .backbones import load_state_strict
from .detector import DetectorModel
from .encoders import PoseEncoder

logger = get_logger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
DETECTOR_KIND = "detector"
POSE_KIND = "pose-encoder"
_REQUIRED_KEYS = ("format_version", "config", "config_hash", "state_dict")


def parameter_checksum(module: nn.Module) -> str:
    """SHA-256 des paramètres nommés, dans l'ordre alphabétique des noms."""
    digest = hashlib.sha256()
    for name, param in sorted(module.named_parameters(), key=lambda item: item[0]):
        digest.update(name.encode("utf-8"))
        digest.update(param.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def _atomic_save(payload: dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def save_checkpoint(
    model: DetectorModel,
    path: Path | str,
    extra: dict[str, Any] | None = None,
    geometry: GeometryConfig | None = None,
) -> Path:
    config = model.config.model_dump(mode="json")
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": DETECTOR_KIND,
        "config": config,
        "config_hash": config_hash(config),
        "state_dict": model.state_dict(),
        "extra": extra or {},
        "geometry": geometry.model_dump(mode="json") if geometry is not None else None,
    }
    return _atomic_save(payload, Path(path))


def read_checkpoint(path: Path | str, kind: str = DETECTOR_KIND) -> dict[str, Any]:
    """Lit et valide le conteneur (sans construire de modèle)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint introuvable: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CorruptCheckpointError(f"Checkpoint illisible ou tronqué ({path}): {exc}") from exc
    if not isinstance(payload, dict) or any(key not in payload for key in _REQUIRED_KEYS):
        raise CorruptCheckpointError(f"Conteneur de checkpoint incomplet: {path}")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise UnsupportedVersionError(payload["format_version"], CHECKPOINT_FORMAT_VERSION)
    found_kind = payload.get("kind", DETECTOR_KIND)
    if found_kind != kind:
        raise IncompatibleCheckpointError(
            f"Checkpoint de type « {found_kind} », « {kind} » attendu ({path})"
        )
    if config_hash(payload["config"]) != payload["config_hash"]:
        raise CorruptCheckpointError(f"Empreinte de configuration incohérente: {path}")
    return payload


def checkpoint_geometry(path: Path | str) -> GeometryConfig | None:
    """Géométrie des vues enregistrée avec le détecteur (None si absente)."""
    stored = read_checkpoint(path).get("geometry")
    if stored is None:
        return None
    try:
        return GeometryConfig.model_validate(stored)
    except ValidationError as exc:
        raise CorruptCheckpointError(f"Géométrie embarquée invalide: {exc}") from exc


def load_checkpoint(path: Path | str, config: ModelConfig | None = None) -> DetectorModel:
    """Reconstruit le détecteur ; `config` force une architecture (doit être compatible)."""
    payload = read_checkpoint(path)
    if config is None:
        try:
            config = ModelConfig.model_validate(payload["config"])
        except ValidationError as exc:
            raise CorruptCheckpointError(f"Configuration embarquée invalide: {exc}") from exc
    model = DetectorModel(config)
    load_state_strict(model, payload["state_dict"], what=f"checkpoint {Path(path).name}")
    model.eval()
    logger.info(
        "Checkpoint chargé",
        extra={"context": {"path": str(path), "config_hash": payload["config_hash"][:12]}},
    )
    return model


def save_pose_checkpoint(
    encoder: PoseEncoder,
    path: Path | str,
    extra: dict[str, Any] | None = None,
) -> Path:
    config = encoder.spec.model_dump(mode="json")
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": POSE_KIND,
        "config": config,
        "config_hash": config_hash(config),
        "state_dict": encoder.state_dict(),
        "extra": extra or {},
    }
    return _atomic_save(payload, Path(path))


def load_pose_weights(model: DetectorModel, path: Path | str) -> None:
    """Charge un encodeur de pose pré-entraîné dans `model`."""
    payload = read_checkpoint(path, kind=POSE_KIND)
    spec = BackboneSpec.model_validate(payload["config"])
    if spec != model.config.pose_backbone:
        raise IncompatibleCheckpointError(
            f"Encodeur de pose {spec.family.value}/D={spec.dim} incompatible avec "
            f"{model.config.pose_backbone.family.value}/D={model.config.pose_backbone.dim}"
        )
    load_state_strict(model.pose_encoder, payload["state_dict"], what=f"pose {Path(path).name}")
    # Réapplique le gel éventuel (requires_grad est conservé par load_state_dict).
    model.set_pose_frozen(model.pose_frozen)
