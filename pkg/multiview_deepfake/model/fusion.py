# Copyright 2025 Multiview DeepFake

"""Tête de fusion en deux étages.

    étage 1 : [v_1 ‖ … ‖ v_k] → Linear → act → Linear → act        (k·D → H1 → F)
    étage 2 : [f ‖ pose] → BatchNorm → Linear → Dropout → act → Linear   (→ 1 logit)

Sans pose, l'étage 2 ne reçoit que ``f``.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import torch
from torch import nn

from ..config import Activation, FusionConfig
from ..errors import ConfigError


def _activation(kind: Activation) -> nn.Module:
    return nn.ReLU() if kind is Activation.RELU else nn.Identity()


class FusionHead(nn.Module):
    def __init__(
        self,
        view_count: int,
        feature_dim: int,
        pose_dim: int,
        config: FusionConfig | None = None,
    ):
        super().__init__()
        config = config or FusionConfig()
        self.view_count = view_count
        self.feature_dim = feature_dim
        self.pose_dim = pose_dim
        self.stage1 = nn.Sequential(
            nn.Linear(view_count * feature_dim, config.hidden_dim),
            _activation(config.activation),
            nn.Linear(config.hidden_dim, config.fused_dim),
            _activation(config.activation),
        )
        self.stage2 = nn.Sequential(
            nn.BatchNorm1d(config.fused_dim + pose_dim),
            nn.Linear(config.fused_dim + pose_dim, config.pose_hidden_dim),
            nn.Dropout(config.dropout),
            _activation(config.activation),
            nn.Linear(config.pose_hidden_dim, 1),
        )

    def forward(self, view_feats: torch.Tensor, pose_feat: torch.Tensor | None = None) -> torch.Tensor:
        """`view_feats` (B, k·D), `pose_feat` (B, P) ou None → logit (B,)."""
        fused = self.stage1(view_feats)
        if self.pose_dim:
            fused = torch.cat([fused, pose_feat], dim=1)
        return self.stage2(fused).squeeze(-1)


def fuse(
    view_feats: Sequence[torch.Tensor],
    pose_feat: torch.Tensor | None,
    head: FusionHead,
    mode: Literal["train", "eval"] = "eval",
) -> torch.Tensor:
    """Vérifie les dimensions puis applique la tête dans le mode demandé."""
    if len(view_feats) != head.view_count:
        raise ConfigError(f"{head.view_count} vues attendues par la fusion, reçu {len(view_feats)}")
    for index, feats in enumerate(view_feats):
        if feats.ndim != 2 or feats.shape[1] != head.feature_dim:
            raise ConfigError(
                f"Vue {index}: caractéristiques de forme {tuple(feats.shape)}, "
                f"(B, {head.feature_dim}) attendu"
            )
    if head.pose_dim:
        if pose_feat is None or pose_feat.ndim != 2 or pose_feat.shape[1] != head.pose_dim:
            shape = None if pose_feat is None else tuple(pose_feat.shape)
            raise ConfigError(f"Caractéristique de pose de forme {shape}, (B, {head.pose_dim}) attendu")
    elif pose_feat is not None:
        raise ConfigError("Cette tête de fusion n'utilise pas la pose")
    head.train(mode == "train")
    return head(torch.cat(list(view_feats), dim=1), pose_feat)
