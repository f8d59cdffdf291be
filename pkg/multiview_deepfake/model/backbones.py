# Copyright 2025 Multiview DeepFake

"""Familles d'encodeurs d'images.

Chaque backbone transforme un lot ``(B, 3, 224, 224)`` en ``(B, D)`` et
désigne une couche spatiale par défaut pour Grad-CAM. Aucun poids n'est
téléchargé : les poids pré-entraînés viennent d'un fichier local.
"""

from __future__ import annotations

from pathlib import Path

import timm
import torch
from torch import nn
from torchvision import models

from ..config import BackboneFamily, BackboneSpec
from ..errors import CorruptCheckpointError, IncompatibleCheckpointError
from ..observability import get_logger

logger = get_logger(__name__)


class Backbone(nn.Module):
    """Interface commune : `feature_dim`, `gradcam_layer`, `token_grid`."""

    feature_dim: int
    gradcam_layer: str
    # Grille (h, w) des tokens pour les familles transformer, None pour les CNN.
    token_grid: tuple[int, int] | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:  # pragma: no cover - abstraite
        raise NotImplementedError


class TinyConvBackbone(Backbone):
    """Petit CNN déterministe pour les tests : 224 → 56 → 28, puis grille 4×4 → D."""

    gradcam_layer = "act2"

    def __init__(self, feature_dim: int = 16):
        super().__init__()
        self.feature_dim = feature_dim
        self.conv1 = nn.Conv2d(3, 8, kernel_size=5, stride=4, padding=2)
        self.act1 = nn.ReLU()
        self.conv2 = nn.Conv2d(8, 16, kernel_size=3, stride=2, padding=1)
        self.act2 = nn.ReLU()
        # Le pooling 4×4 conserve la position grossière (utile à la pose).
        self.pool = nn.AdaptiveAvgPool2d(4)
        self.proj = nn.Linear(16 * 4 * 4, feature_dim)
        self.act3 = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.act2(self.conv2(self.act1(self.conv1(x))))
        return self.act3(self.proj(torch.flatten(self.pool(x), 1)))


class ConvBackbone(Backbone):
    """CNN torchvision : corps convolutif + pooling global moyen."""

    def __init__(self, body: nn.Module, feature_dim: int, gradcam_layer: str):
        super().__init__()
        self.body = body
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.feature_dim = feature_dim
        self.gradcam_layer = gradcam_layer

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.flatten(self.pool(self.body(x)), 1)


class TransformerBackbone(Backbone):
    """BeiT (timm) sans tête de classification ; sortie = token poolé."""

    def __init__(self, model_name: str = "beit_base_patch16_224"):
        super().__init__()
        self.model = timm.create_model(model_name, pretrained=False, num_classes=0)
        self.feature_dim = int(self.model.num_features)
        self.gradcam_layer = f"model.blocks.{len(self.model.blocks) - 1}"
        self.token_grid = tuple(self.model.patch_embed.grid_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


def _residual_conv() -> ConvBackbone:
    net = models.resnet50(weights=None)
    body = nn.Sequential(
        net.conv1, net.bn1, net.relu, net.maxpool, net.layer1, net.layer2, net.layer3, net.layer4
    )
    return ConvBackbone(body, feature_dim=2048, gradcam_layer="body.7")


def _mobile_conv() -> ConvBackbone:
    net = models.mobilenet_v3_small(weights=None)
    return ConvBackbone(
        net.features, feature_dim=576, gradcam_layer=f"body.{len(net.features) - 1}"
    )


def load_state_strict(module: nn.Module, state_dict: dict[str, torch.Tensor], what: str) -> None:
    """Charge `state_dict` en nommant le premier tenseur manquant, en trop ou mal dimensionné."""
    expected = module.state_dict()
    for name, tensor in expected.items():
        if name not in state_dict:
            raise IncompatibleCheckpointError(
                f"{what}: tenseur manquant « {name} »", tensor_name=name
            )
        if tuple(state_dict[name].shape) != tuple(tensor.shape):
            raise IncompatibleCheckpointError(
                f"{what}: forme incompatible pour « {name} » "
                f"(checkpoint {tuple(state_dict[name].shape)}, modèle {tuple(tensor.shape)})",
                tensor_name=name,
            )
    unexpected = sorted(set(state_dict) - set(expected))
    if unexpected:
        raise IncompatibleCheckpointError(
            f"{what}: tenseur inattendu « {unexpected[0]} »", tensor_name=unexpected[0]
        )
    module.load_state_dict(state_dict, strict=True)


def _load_pretrained(backbone: Backbone, path: Path) -> None:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CorruptCheckpointError(f"Poids pré-entraînés illisibles ({path}): {exc}") from exc
    state = payload.get("state_dict", payload) if isinstance(payload, dict) else None
    if not isinstance(state, dict):
        raise CorruptCheckpointError(f"Poids pré-entraînés sans state_dict: {path}")
    load_state_strict(backbone, state, what=f"poids pré-entraînés {path.name}")
    logger.info("Poids pré-entraînés chargés", extra={"context": {"path": str(path)}})


def build_backbone(spec: BackboneSpec) -> Backbone:
    if spec.family is BackboneFamily.TINY_TEST:
        backbone: Backbone = TinyConvBackbone(spec.dim)
    elif spec.family is BackboneFamily.RESIDUAL_CONV:
        backbone = _residual_conv()
    elif spec.family is BackboneFamily.MOBILE_CONV:
        backbone = _mobile_conv()
    else:
        backbone = TransformerBackbone()
    if spec.pretrained_checkpoint is not None:
        _load_pretrained(backbone, Path(spec.pretrained_checkpoint))
    return backbone
