# Copyright 2025 Multiview DeepFake

"""Entraînement : perte, pré-entraînement de la pose, boucle `fit` et journal d'exécution."""

from .losses import BCE_EPS, bce_loss
from .pose import PoseReport, evaluate_pose, pretrain_pose
from .runtime import make_loader, seed_everything
from .trainer import EpochRecord, FitResult, RunLog, fit, training_hash

__all__ = [
    "BCE_EPS",
    "EpochRecord",
    "FitResult",
    "PoseReport",
    "RunLog",
    "bce_loss",
    "evaluate_pose",
    "fit",
    "make_loader",
    "pretrain_pose",
    "seed_everything",
    "training_hash",
]
