# Copyright 2025 Multiview DeepFake

"""Pré-entraînement de l'encodeur de pose (entropie croisée sur 13 classes)."""

from __future__ import annotations

import torch
from pydantic import Field
from torch import nn
from torch.utils.data import DataLoader

from ..config import POSE_CLASS_COUNT, MultiviewBaseModel, TrainConfig
from ..data.datasets import PoseDataset
from ..errors import MissingPoseClassesError, NumericFaultError
from ..model.checkpoint import parameter_checksum
from ..model.encoders import PoseEncoder
from ..observability import get_logger, get_tracer
from .runtime import make_loader, resolve_device, seed_everything

logger = get_logger(__name__)

SOFTMAX_TOLERANCE = 1e-6


class PoseEpoch(MultiviewBaseModel):
    epoch: int
    loss: float
    accuracy: float


class PoseReport(MultiviewBaseModel):
    """Perte/précision avant entraînement (epoch 0) puis après chaque epoch."""

    initial_loss: float
    initial_accuracy: float
    epochs: list[PoseEpoch] = Field(default_factory=list)
    checksum: str = ""

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].accuracy if self.epochs else self.initial_accuracy


@torch.no_grad()
def evaluate_pose(encoder: PoseEncoder, loader: DataLoader, device: torch.device) -> tuple[float, float]:
    """(perte moyenne, précision) en mode évaluation ; vérifie la normalisation du softmax."""
    encoder.eval()
    total_loss, correct, seen = 0.0, 0, 0
    for images, poses in loader:
        images, poses = images.to(device), poses.to(device)
        logits = encoder(images)
        sums = torch.softmax(logits.double(), dim=1).sum(dim=1)
        if not bool(torch.all((sums - 1.0).abs() <= SOFTMAX_TOLERANCE)):
            raise NumericFaultError(location="encoder:pose:softmax")
        total_loss += float(nn.functional.cross_entropy(logits, poses, reduction="sum"))
        correct += int((logits.argmax(dim=1) == poses).sum())
        seen += len(poses)
    return total_loss / seen, correct / seen


def pretrain_pose(
    encoder: PoseEncoder,
    dataset: PoseDataset,
    config: TrainConfig,
) -> PoseReport:
    """Entraîne `encoder` sur `dataset` ; toutes les classes doivent être présentes."""
    missing = sorted(set(range(POSE_CLASS_COUNT)) - dataset.classes)
    if missing:
        raise MissingPoseClassesError(missing)

    seed_everything(config.seed)
    device = resolve_device(config.device)
    encoder.to(device)
    for param in encoder.parameters():
        param.requires_grad_(True)
    train_loader = make_loader(
        dataset, config.pose_batch_size, seed=config.seed, num_workers=config.num_workers, batch_norm=False
    )
    eval_loader = make_loader(dataset, config.pose_batch_size, seed=config.seed, shuffle=False)
    optimizer = torch.optim.Adam(
        encoder.parameters(), lr=config.pose_learning_rate, betas=config.betas, eps=config.adam_eps
    )
    tracer = get_tracer()
    run_id = f"pose-{config.seed}"
    tracer.start_run(run_id, "pretrain-pose", config.model_dump(mode="json"))

    initial_loss, initial_accuracy = evaluate_pose(encoder, eval_loader, device)
    report = PoseReport(initial_loss=initial_loss, initial_accuracy=initial_accuracy)
    for epoch in range(1, config.pose_epochs + 1):
        encoder.train()
        for batch_index, (images, poses) in enumerate(train_loader):
            images, poses = images.to(device), poses.to(device)
            loss = nn.functional.cross_entropy(encoder(images), poses)
            if not bool(torch.isfinite(loss)):
                raise NumericFaultError(location="loss:pose", batch_index=batch_index, epoch=epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        loss_value, accuracy = evaluate_pose(encoder, eval_loader, device)
        report.epochs.append(PoseEpoch(epoch=epoch, loss=loss_value, accuracy=accuracy))
        logger.info(
            "Epoch de pose terminée",
            extra={"context": {"epoch": epoch, "loss": round(loss_value, 6), "accuracy": round(accuracy, 4)}},
        )

    report.checksum = parameter_checksum(encoder)
    tracer.end_run(run_id, {"accuracy": report.final_accuracy})
    tracer.flush()
    return report
