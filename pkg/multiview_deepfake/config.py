# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Configuration du détecteur DeepFake multi-vues.

Tous les objets de configuration dérivent de `MultiviewBaseModel` : les clés
inconnues sont refusées et chaque configuration possède une empreinte stable
(`config_hash`) embarquée dans tous les artefacts produits.
"""

from __future__ import annotations

import hashlib
import json
import os
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

CONFIG_ENV_VAR = "MVDF_CONFIG"
POSE_CLASS_COUNT = 13


class MultiviewBaseModel(BaseModel):
    """Modèle de base pour toutes les structures de configuration et d'annotation."""

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
        extra="forbid",
        validate_assignment=True,
        str_strip_whitespace=True,
        frozen=False,
    )


class BackboneFamily(str, Enum):
    """Familles d'encodeurs disponibles."""

    RESIDUAL_CONV = "residual-conv"
    IMAGE_TRANSFORMER = "image-transformer"
    MOBILE_CONV = "mobile-conv"
    TINY_TEST = "tiny-test"


class ViewName(str, Enum):
    """Les trois vues extraites d'un visage."""

    GLOBAL = "global"
    MIDDLE = "middle"
    LOCAL = "local"


ALL_VIEWS: tuple[ViewName, ...] = (ViewName.GLOBAL, ViewName.MIDDLE, ViewName.LOCAL)


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class Label(IntEnum):
    """Classe positive = fake."""

    REAL = 0
    FAKE = 1


class ArtifactKind(str, Enum):
    """Artefacts injectés dans les visages synthétiques « fake »."""

    CENTRAL_BLEND_SEAM = "central-blend-seam"
    PATCH_NOISE = "patch-noise"
    COLOR_MISMATCH = "color-mismatch"


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


# Dimension native des caractéristiques par famille (None = configurable).
NATIVE_FEATURE_DIMS: dict[BackboneFamily, int | None] = {
    BackboneFamily.RESIDUAL_CONV: 2048,
    BackboneFamily.IMAGE_TRANSFORMER: 768,
    BackboneFamily.MOBILE_CONV: 576,
    BackboneFamily.TINY_TEST: None,
}


class GeometryConfig(MultiviewBaseModel):
    """Paramètres d'extraction des vues."""

    margin: float = Field(default=15.0, ge=0)
    expand: float = Field(default=20.0, ge=0)
    side: int = Field(default=224, ge=8)


class BackboneSpec(MultiviewBaseModel):
    """Description d'un encodeur (famille, dimension, poids pré-entraînés)."""

    family: BackboneFamily = BackboneFamily.TINY_TEST
    feature_dim: int | None = Field(default=None, ge=8)
    pretrained_checkpoint: Path | None = None

    @model_validator(mode="after")
    def _check_family(self) -> BackboneSpec:
        native = NATIVE_FEATURE_DIMS[self.family]
        if native is None:
            if self.feature_dim is None:
                # validate_assignment relancerait ce validateur : on passe par __dict__.
                self.__dict__["feature_dim"] = 16
            if self.pretrained_checkpoint is not None:
                raise ValueError("la famille tiny-test n'accepte pas de checkpoint pré-entraîné")
        else:
            if self.feature_dim is None:
                self.__dict__["feature_dim"] = native
            elif self.feature_dim != native:
                raise ValueError(
                    f"feature_dim={self.feature_dim} incompatible avec la famille "
                    f"{self.family.value} (dimension native {native})"
                )
        return self

    @property
    def dim(self) -> int:
        assert self.feature_dim is not None
        return self.feature_dim


class FusionConfig(MultiviewBaseModel):
    """Hyperparamètres de la tête de fusion en deux étages."""

    hidden_dim: int = Field(default=512, ge=1)  # H1
    fused_dim: int = Field(default=256, ge=1)  # F
    pose_hidden_dim: int = Field(default=128, ge=1)
    dropout: float = Field(default=0.3, ge=0.0, lt=1.0)
    activation: Activation = Activation.RELU


class ModelConfig(MultiviewBaseModel):
    """Architecture complète : vues utilisées, encodeurs, pose et fusion."""

    variant: str = "fusion-pose"
    view_backbone: BackboneSpec = Field(default_factory=BackboneSpec)
    pose_backbone: BackboneSpec = Field(default_factory=BackboneSpec)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    views: list[ViewName] = Field(default_factory=lambda: list(ALL_VIEWS))
    use_pose: bool = True
    per_view_heads: bool = False  # têtes par vue, pour le pré-chauffage uniquement
    pose_classes: int = POSE_CLASS_COUNT
    seed: int = 0

    @field_validator("views")
    @classmethod
    def _check_views(cls, v: list[ViewName]) -> list[ViewName]:
        if not v:
            raise ValueError("au moins une vue est requise")
        if len(set(v)) != len(v):
            raise ValueError(f"vues dupliquées: {v}")
        # Ordre canonique global → middle → local.
        return [view for view in ALL_VIEWS if view in v]

    @field_validator("pose_classes")
    @classmethod
    def _check_pose_classes(cls, v: int) -> int:
        if v != POSE_CLASS_COUNT:
            raise ValueError(f"l'encodeur de pose prédit exactement {POSE_CLASS_COUNT} classes")
        return v


class TrainConfig(MultiviewBaseModel):
    """Hyperparamètres d'entraînement (Adam + entropie croisée binaire)."""

    epochs: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    batch_size: int = Field(default=16, ge=2)  # batch-norm de la fusion en mode train
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0)
    weight_decay: float = Field(default=0.0, ge=0)
    freeze_pose: bool = True
    checkpoint_every: int = Field(default=1, ge=1)
    num_workers: int = Field(default=0, ge=0)
    warmup_epochs: int = Field(default=0, ge=0)
    lr_schedule: Literal["none", "cosine"] = "none"
    early_stopping_patience: int | None = Field(default=None, ge=1)
    pose_epochs: int = Field(default=30, ge=1)
    pose_learning_rate: float = Field(default=1e-3, gt=0)
    pose_batch_size: int = Field(default=32, ge=1)
    precomputed_views: bool = True
    device: str = "cpu"


class SyntheticSpec(MultiviewBaseModel):
    """Jeu synthétique de bureau (visages procéduraux)."""

    count: int = Field(default=100, ge=2)  # par classe
    image_side: int = Field(default=160, ge=64)
    artifact_kind: ArtifactKind = ArtifactKind.CENTRAL_BLEND_SEAM
    pose_distribution: list[float] = Field(
        default_factory=lambda: [1.0 / POSE_CLASS_COUNT] * POSE_CLASS_COUNT
    )
    seed: int = 0

    @field_validator("pose_distribution")
    @classmethod
    def _check_distribution(cls, v: list[float]) -> list[float]:
        if len(v) != POSE_CLASS_COUNT:
            raise ValueError(f"distribution de pose sur {POSE_CLASS_COUNT} classes attendue")
        if any(p < 0 for p in v) or sum(v) <= 0:
            raise ValueError("distribution de pose invalide")
        total = sum(v)
        return [p / total for p in v]


class RunConfig(MultiviewBaseModel):
    """Configuration résolue d'une exécution (fichier + options + environnement)."""

    seed: int = 0
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)


# ── Empreintes ────────────────────────────────────────────────────────────────


def canonical_json(data: Any) -> str:
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json")
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: BaseModel | dict) -> str:
    """Empreinte SHA-256 stable du JSON canonique d'une configuration."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


# ── Préréglages d'ablation ────────────────────────────────────────────────────

VARIANT_PRESETS: dict[str, dict[str, Any]] = {
    "local-view": {"views": [ViewName.LOCAL], "use_pose": False},
    "middle-view": {"views": [ViewName.MIDDLE], "use_pose": False},
    "global-view": {"views": [ViewName.GLOBAL], "use_pose": False},
    "view-fusion": {"views": list(ALL_VIEWS), "use_pose": False},
    "fusion-pose": {"views": list(ALL_VIEWS), "use_pose": True},
}


def variant_config(
    variant: str,
    family: BackboneFamily = BackboneFamily.TINY_TEST,
    feature_dim: int | None = None,
    pose_family: BackboneFamily | None = None,
    seed: int = 0,
    **fusion: Any,
) -> ModelConfig:
    """Construit la `ModelConfig` d'une ligne du tableau d'ablation."""
    if variant not in VARIANT_PRESETS:
        raise ConfigError(f"Variante inconnue: {variant} (choix: {sorted(VARIANT_PRESETS)})")
    pose_family = pose_family or (
        BackboneFamily.TINY_TEST if family is BackboneFamily.TINY_TEST else BackboneFamily.MOBILE_CONV
    )
    pose_dim = feature_dim if pose_family is BackboneFamily.TINY_TEST else None
    return ModelConfig(
        variant=variant,
        view_backbone=BackboneSpec(family=family, feature_dim=feature_dim),
        pose_backbone=BackboneSpec(family=pose_family, feature_dim=pose_dim),
        fusion=FusionConfig(**fusion),
        seed=seed,
        **VARIANT_PRESETS[variant],
    )


# ── Chargement ────────────────────────────────────────────────────────────────


def _set_dotted(target: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = target
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"Clé de configuration invalide: {dotted}")
    node[keys[-1]] = value


def load_run_config(
    path: Path | str | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Fusionne défauts < fichier JSON < options (clés pointées, ex. ``train.epochs``).

    Sans chemin explicite, la variable d'environnement ``MVDF_CONFIG`` est consultée.
    """
    if path is None and os.getenv(CONFIG_ENV_VAR):
        path = os.environ[CONFIG_ENV_VAR]
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Fichier de configuration introuvable: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Configuration JSON invalide ({path}): {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"La configuration doit être un objet JSON: {path}")
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(data, key, value)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Configuration invalide: {exc}") from exc


# Configuration globale par défaut
DEFAULT_CONFIG = RunConfig()


def get_config() -> RunConfig:
    """Retourne la configuration actuelle."""
    return DEFAULT_CONFIG


def update_config(**kwargs: Any) -> None:
    """Met à jour la configuration globale."""
    for key, value in kwargs.items():
        if hasattr(DEFAULT_CONFIG, key):
            setattr(DEFAULT_CONFIG, key, value)
