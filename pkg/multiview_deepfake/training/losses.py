# Copyright 2025 Multiview DeepFake

"""Entropie croisée binaire sur probabilités bornées."""

from __future__ import annotations

import torch

BCE_EPS = 1e-7


def bce_loss(prob: torch.Tensor, labels: torch.Tensor, eps: float = BCE_EPS) -> torch.Tensor:
    """Moyenne de −[y·log p + (1−y)·log(1−p)], p bornée à [eps, 1−eps]."""
    if prob.shape != labels.shape:
        raise ValueError(
            f"Formes incompatibles: probabilités {tuple(prob.shape)}, labels {tuple(labels.shape)}"
        )
    p = prob.clamp(eps, 1.0 - eps)
    y = labels.to(p.dtype)
    return -(y * torch.log(p) + (1.0 - y) * torch.log1p(-p)).mean()
