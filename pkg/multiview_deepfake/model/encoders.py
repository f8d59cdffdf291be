# Copyright 2025 Multiview DeepFake

"""Encodeurs de vue et encodeur de pose."""

from __future__ import annotations

import torch
from torch import nn

from ..config import POSE_CLASS_COUNT, BackboneSpec, ViewName
from .backbones import Backbone, build_backbone

VIEW_HEAD_HIDDEN = 128


class ViewEncoder(nn.Module):
    """Encodeur d'une vue : backbone propre + tête de classification optionnelle.

    La tête ne sert qu'au pré-chauffage par vue ; la fusion consomme les
    caractéristiques du backbone.
    """

    def __init__(self, view: ViewName, spec: BackboneSpec, with_head: bool = False):
        super().__init__()
        self.view = ViewName(view)
        self.spec = spec
        self.backbone: Backbone = build_backbone(spec)
        self.head: nn.Module | None = None
        if with_head:
            self.head = nn.Sequential(
                nn.Linear(self.feature_dim, VIEW_HEAD_HIDDEN),
                nn.ReLU(),
                nn.Linear(VIEW_HEAD_HIDDEN, 1),
            )

    @property
    def feature_dim(self) -> int:
        return self.backbone.feature_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(x)

    def classify(self, x: torch.Tensor) -> torch.Tensor:
        """Logit « fake » de cette seule vue, forme (B,)."""
        if self.head is None:
            raise RuntimeError(f"L'encodeur {self.view.value} n'a pas de tête de classification")
        return self.head(self.backbone(x)).squeeze(-1)


class PoseEncoder(nn.Module):
    """Classifieur de pose à 13 classes ; lit la vue médiane."""

    def __init__(self, spec: BackboneSpec, class_count: int = POSE_CLASS_COUNT):
        super().__init__()
        self.spec = spec
        self.class_count = class_count
        self.backbone: Backbone = build_backbone(spec)
        self.classifier = nn.Linear(self.backbone.feature_dim, class_count)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.backbone(x))
