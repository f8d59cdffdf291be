# Copyright 2025 Multiview DeepFake

"""Détecteur multi-vues : trois encodeurs de vue, un encodeur de pose, une tête de fusion."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import torch
from torch import nn

from ..config import ALL_VIEWS, ModelConfig, ViewName
from ..data.datasets import triples_to_batch
from ..errors import ConfigError, NumericFaultError
from ..observability import get_logger
from ..vision.views import ViewTriple
from .encoders import PoseEncoder, ViewEncoder
from .fusion import FusionHead

logger = get_logger(__name__)


@dataclass
class DetectorOutput:
    prob: torch.Tensor  # (B,)
    logit: torch.Tensor  # (B,)
    pose_logits: torch.Tensor  # (B, 13)


def _check_finite(tensor: torch.Tensor, location: str) -> torch.Tensor:
    if not bool(torch.isfinite(tensor).all()):
        raise NumericFaultError(location=location)
    return tensor


class DetectorModel(nn.Module):
    """Détecteur complet ; l'encodeur de pose lit toujours la vue médiane."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.views: list[ViewName] = list(config.views)
        self.encoders = nn.ModuleDict(
            {
                view.value: ViewEncoder(view, config.view_backbone, with_head=config.per_view_heads)
                for view in self.views
            }
        )
        self.pose_encoder = PoseEncoder(config.pose_backbone, config.pose_classes)
        self.fusion = FusionHead(
            view_count=len(self.views),
            feature_dim=config.view_backbone.dim,
            pose_dim=config.pose_classes if config.use_pose else 0,
            config=config.fusion,
        )
        # Gelé par défaut ; `fit` applique TrainConfig.freeze_pose.
        self.set_pose_frozen(True)

    @property
    def required_views(self) -> list[ViewName]:
        """Vues à fournir : celles du modèle plus la vue médiane pour la pose."""
        return [v for v in ALL_VIEWS if v in self.views or v is ViewName.MIDDLE]

    def set_pose_frozen(self, frozen: bool) -> None:
        self.pose_frozen = frozen
        for param in self.pose_encoder.parameters():
            param.requires_grad_(not frozen)
        if frozen:
            self.pose_encoder.eval()

    def train(self, mode: bool = True) -> DetectorModel:
        super().train(mode)
        if self.pose_frozen:
            # Statistiques de batch-norm de l'encodeur de pose figées.
            self.pose_encoder.eval()
        return self

    def encode(self, views: Mapping[str, torch.Tensor]) -> dict[ViewName, torch.Tensor]:
        feats: dict[ViewName, torch.Tensor] = {}
        for view in self.views:
            if view.value not in views:
                raise ConfigError(f"Vue manquante dans le lot: {view.value}")
            feats[view] = _check_finite(self.encoders[view.value](views[view.value]), f"encoder:{view.value}")
        return feats

    def forward(self, views: Mapping[str, torch.Tensor]) -> DetectorOutput:
        if ViewName.MIDDLE.value not in views:
            raise ConfigError("La vue médiane est requise par l'encodeur de pose")
        feats = self.encode(views)
        pose_logits = _check_finite(self.pose_encoder(views[ViewName.MIDDLE.value]), "encoder:pose")
        view_feats = torch.cat([feats[v] for v in self.views], dim=1)
        logit = self.fusion(view_feats, pose_logits if self.config.use_pose else None)
        logit = _check_finite(logit, "fusion")
        return DetectorOutput(prob=torch.sigmoid(logit), logit=logit, pose_logits=pose_logits)


def parameter_count(module: nn.Module, trainable_only: bool = False) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad or not trainable_only)


def build_model(config: ModelConfig) -> DetectorModel:
    """Construit un détecteur initialisé de façon déterministe à partir de `config.seed`."""
    torch.manual_seed(config.seed)
    model = DetectorModel(config)
    logger.info(
        "Modèle construit",
        extra={
            "context": {
                "variant": config.variant,
                "views": [v.value for v in config.views],
                "backbone": config.view_backbone.family.value,
                "parameters": parameter_count(model),
                "trainable": parameter_count(model, trainable_only=True),
            }
        },
    )
    return model


def forward(
    model: DetectorModel,
    views: Sequence[ViewTriple] | Mapping[str, torch.Tensor],
) -> tuple[torch.Tensor, torch.Tensor]:
    """(probabilités (B,), logits de pose (B, 13)) pour un lot de vues."""
    if not isinstance(views, Mapping):
        if not views:
            raise ValueError("Lot vide")
        views = triples_to_batch(views, model.required_views)
    out = model(views)
    return out.prob, out.pose_logits


def pose_class_from_logits(logits: torch.Tensor) -> torch.Tensor:
    """Argmax par échantillon ; en cas d'égalité l'indice le plus bas l'emporte."""
    return torch.argmax(logits, dim=-1)


@torch.no_grad()
def predict_pose(model: DetectorModel, middle_views: torch.Tensor) -> torch.Tensor:
    was_training = model.pose_encoder.training
    model.pose_encoder.eval()
    try:
        logits = _check_finite(model.pose_encoder(middle_views), "encoder:pose")
    finally:
        model.pose_encoder.train(was_training)
    return pose_class_from_logits(logits)
