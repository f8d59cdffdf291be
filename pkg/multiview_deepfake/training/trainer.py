# Copyright 2025 Multiview DeepFake

"""Boucle d'entraînement du détecteur (Adam + entropie croisée binaire).

Dossier d'exécution::

    run_dir/
      run_log.jsonl    en-tête + un enregistrement par epoch terminée
      last.pt          dernier état (optimiseur, epoch, graines) pour la reprise
      best.pt          meilleur modèle selon le F1 de validation
"""

from __future__ import annotations

import json
import math
import os
import time
from pathlib import Path
from typing import Any

import torch
from pydantic import Field
from torch.utils.data import Dataset

from ..config import GeometryConfig, MultiviewBaseModel, TrainConfig, config_hash
from ..errors import ConfigError, InsufficientDataError, NumericFaultError
from ..evaluation.report import predict_dataset, report_from_predictions
from ..model.backbones import load_state_strict
from ..model.checkpoint import read_checkpoint, save_checkpoint
from ..model.detector import DetectorModel
from ..observability import get_logger, get_tracer
from .losses import bce_loss
from .runtime import make_loader, resolve_device, seed_everything

logger = get_logger(__name__)

RUN_LOG_NAME = "run_log.jsonl"
LAST_CHECKPOINT = "last.pt"
BEST_CHECKPOINT = "best.pt"


class EpochRecord(MultiviewBaseModel):
    epoch: int = Field(ge=1)
    phase: str = "joint"
    learning_rate: float
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_precision: float
    val_recall: float
    val_f1: float
    val_auc: float | None = None
    is_best: bool = False
    wall_clock_s: float = 0.0


class RunLog(MultiviewBaseModel):
    """Journal d'une exécution ; persisté en JSON lines à chaque epoch."""

    config_hash: str
    seed: int = 0
    records: list[EpochRecord] = Field(default_factory=list)
    best_epoch: int | None = None
    best_f1: float | None = None

    def append(self, record: EpochRecord) -> None:
        expected = self.records[-1].epoch + 1 if self.records else 1
        if record.epoch != expected:
            raise ValueError(f"Epoch {record.epoch} hors séquence (attendue: {expected})")
        self.records.append(record)
        if record.is_best:
            self.best_epoch = record.epoch
            self.best_f1 = record.val_f1

    def truncate(self, last_epoch: int) -> None:
        self.records = [r for r in self.records if r.epoch <= last_epoch]
        best = [r for r in self.records if r.is_best]
        self.best_epoch = best[-1].epoch if best else None
        self.best_f1 = best[-1].val_f1 if best else None

    def write(self, path: Path | str) -> Path:
        path = Path(path)
        tmp = path.with_name(f".{path.name}.tmp")
        with tmp.open("w", encoding="utf-8") as f:
            header = {"type": "header", "config_hash": self.config_hash, "seed": self.seed}
            f.write(json.dumps(header) + "\n")
            for record in self.records:
                f.write(json.dumps({"type": "epoch", **record.model_dump(mode="json")}) + "\n")
        os.replace(tmp, path)
        return path

    @classmethod
    def read(cls, path: Path | str) -> RunLog:
        lines = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
        if not lines or lines[0].get("type") != "header":
            raise ValueError(f"Journal d'exécution sans en-tête: {path}")
        log = cls(config_hash=lines[0]["config_hash"], seed=lines[0].get("seed", 0))
        for row in lines[1:]:
            row.pop("type", None)
            log.append(EpochRecord.model_validate(row))
        return log

    def numeric_view(self) -> list[dict[str, Any]]:
        """Enregistrements sans les champs d'horloge (comparaison entre exécutions)."""
        return [r.model_dump(exclude={"wall_clock_s"}) for r in self.records]


class FitResult(MultiviewBaseModel):
    best_checkpoint: Path
    last_checkpoint: Path
    run_log: RunLog
    stopped_early: bool = False


def training_hash(model: DetectorModel, config: TrainConfig) -> str:
    """Empreinte de la configuration ; `epochs` en est exclu pour pouvoir prolonger une exécution."""
    return config_hash(
        {
            "model": model.config.model_dump(mode="json"),
            "train": config.model_dump(mode="json", exclude={"epochs"}),
        }
    )


def _make_optimizer(model: DetectorModel, config: TrainConfig) -> torch.optim.Optimizer:
    params = [p for p in model.parameters() if p.requires_grad]
    return torch.optim.Adam(
        params,
        lr=config.learning_rate,
        betas=config.betas,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )


def _make_scheduler(optimizer: torch.optim.Optimizer, config: TrainConfig):
    if config.lr_schedule == "cosine":
        return torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=config.epochs)
    return None


def _warmup_loss(model: DetectorModel, views: dict[str, torch.Tensor], labels: torch.Tensor) -> torch.Tensor:
    """Moyenne des pertes des têtes par vue (pré-chauffage des encodeurs)."""
    losses = []
    for view in model.views:
        logit = model.encoders[view.value].classify(views[view.value])
        losses.append(bce_loss(torch.sigmoid(logit), labels))
    return torch.stack(losses).mean()


def _train_epoch(
    model: DetectorModel,
    dataset: Dataset,
    optimizer: torch.optim.Optimizer,
    config: TrainConfig,
    epoch: int,
    warmup: bool,
    device: torch.device,
) -> tuple[float, float]:
    model.train()
    # Graine par epoch : une reprise rejoue exactement le même ordre.
    loader = make_loader(
        dataset, config.batch_size, seed=config.seed + epoch, num_workers=config.num_workers
    )
    total_loss, correct, seen = 0.0, 0, 0
    for batch_index, batch in enumerate(loader):
        views = {name: t.to(device) for name, t in batch["views"].items()}
        labels = batch["label"].to(device)
        try:
            if warmup:
                loss = _warmup_loss(model, views, labels)
                prob = None
            else:
                out = model(views)
                prob = out.prob
                loss = bce_loss(prob, labels)
        except NumericFaultError as exc:
            raise NumericFaultError(exc.location, batch_index=batch_index, epoch=epoch) from exc
        if not bool(torch.isfinite(loss)):
            raise NumericFaultError("loss", batch_index=batch_index, epoch=epoch)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        total_loss += float(loss) * len(labels)
        seen += len(labels)
        if prob is not None:
            correct += int(((prob.detach() >= 0.5).float() == labels).sum())
    return total_loss / max(seen, 1), correct / max(seen, 1)


def _validate(
    model: DetectorModel, dataset: Dataset, config: TrainConfig, device: torch.device
) -> tuple[float, Any]:
    probs, labels = predict_dataset(model, dataset, batch_size=config.batch_size, device=device)
    loss = float(bce_loss(torch.from_numpy(probs), torch.from_numpy(labels).double()))
    return loss, report_from_predictions(probs, labels, split="val", variant=model.config.variant)


def fit(
    model: DetectorModel,
    train_set: Dataset,
    val_set: Dataset,
    config: TrainConfig,
    run_dir: Path | str,
    resume: bool = False,
    geometry: GeometryConfig | None = None,
) -> FitResult:
    """Entraîne `model` ; conserve le meilleur checkpoint selon le F1 de validation.

    `geometry` (géométrie des vues des datasets) est enregistrée dans chaque
    checkpoint pour que l'inférence extraie les vues de la même façon.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    if config.warmup_epochs and not model.config.per_view_heads:
        raise ConfigError("warmup_epochs > 0 exige model.per_view_heads = true")
    if len(train_set) < 2:
        raise InsufficientDataError(
            f"Au moins 2 échantillons d'entraînement requis, {len(train_set)} fourni"
        )
    device = resolve_device(config.device)
    seed_everything(config.seed)
    model.set_pose_frozen(config.freeze_pose)
    model.to(device)
    optimizer = _make_optimizer(model, config)
    scheduler = _make_scheduler(optimizer, config)
    run_hash = training_hash(model, config)
    log = RunLog(config_hash=run_hash, seed=config.seed)
    last_path, best_path = run_dir / LAST_CHECKPOINT, run_dir / BEST_CHECKPOINT
    start_epoch, patience = 1, 0

    if resume and last_path.exists():
        payload = read_checkpoint(last_path)
        extra = payload.get("extra") or {}
        if extra.get("run_hash") != run_hash:
            raise ConfigError(
                f"Reprise impossible : empreinte {str(extra.get('run_hash'))[:12]} ≠ {run_hash[:12]}"
            )
        load_state_strict(model, payload["state_dict"], what="reprise")
        model.set_pose_frozen(config.freeze_pose)
        optimizer.load_state_dict(extra["optimizer"])
        if scheduler is not None and extra.get("scheduler"):
            scheduler.load_state_dict(extra["scheduler"])
        torch.set_rng_state(extra["rng_state"])
        start_epoch = int(extra["epoch"]) + 1
        patience = int(extra.get("patience", 0))
        log = RunLog.read(run_dir / RUN_LOG_NAME)
        log.truncate(start_epoch - 1)
        logger.info("Reprise de l'entraînement", extra={"context": {"epoch": start_epoch}})

    tracer = get_tracer()
    run_id = f"train-{run_hash[:12]}-{config.seed}"
    tracer.start_run(run_id, "train", {"config_hash": run_hash})
    stopped_early = False

    for epoch in range(start_epoch, config.epochs + 1):
        started = time.perf_counter()
        warmup = epoch <= config.warmup_epochs
        lr = optimizer.param_groups[0]["lr"]
        tracer.start_span(run_id, f"epoch:{epoch}", {"lr": lr, "warmup": warmup})
        train_loss, train_acc = _train_epoch(model, train_set, optimizer, config, epoch, warmup, device)
        if scheduler is not None:
            scheduler.step()
        val_loss, val = _validate(model, val_set, config, device)
        is_best = not warmup and (log.best_f1 is None or val.f1 > log.best_f1)
        record = EpochRecord(
            epoch=epoch,
            phase="warmup" if warmup else "joint",
            learning_rate=lr,
            train_loss=train_loss,
            train_accuracy=train_acc,
            val_loss=val_loss,
            val_precision=val.precision,
            val_recall=val.recall,
            val_f1=val.f1,
            val_auc=val.auc,
            is_best=is_best,
            wall_clock_s=round(time.perf_counter() - started, 3),
        )
        log.append(record)
        if is_best:
            save_checkpoint(
                model,
                best_path,
                extra={"epoch": epoch, "val_f1": val.f1, "run_hash": run_hash},
                geometry=geometry,
            )
            patience = 0
        elif not warmup:
            patience += 1
        if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
            _save_last(model, last_path, optimizer, scheduler, epoch, patience, run_hash, geometry)
        log.write(run_dir / RUN_LOG_NAME)
        tracer.end_span(run_id, f"epoch:{epoch}", record.model_dump(mode="json"))
        logger.info(
            "Epoch terminée",
            extra={
                "context": {
                    "epoch": epoch,
                    "train_loss": round(train_loss, 6),
                    "val_f1": round(val.f1, 4),
                    "best": is_best,
                }
            },
        )
        if config.early_stopping_patience is not None and patience >= config.early_stopping_patience:
            _save_last(model, last_path, optimizer, scheduler, epoch, patience, run_hash, geometry)
            stopped_early = True
            logger.info("Arrêt anticipé", extra={"context": {"epoch": epoch, "patience": patience}})
            break

    if not best_path.exists():
        save_checkpoint(
            model,
            best_path,
            extra={"epoch": 0, "val_f1": math.nan, "run_hash": run_hash},
            geometry=geometry,
        )
    if not last_path.exists():
        _save_last(
            model, last_path, optimizer, scheduler, start_epoch - 1, patience, run_hash, geometry
        )
    tracer.end_run(run_id, {"best_epoch": log.best_epoch, "best_f1": log.best_f1})
    tracer.flush()
    return FitResult(
        best_checkpoint=best_path, last_checkpoint=last_path, run_log=log, stopped_early=stopped_early
    )


def _save_last(
    model: DetectorModel,
    path: Path,
    optimizer: torch.optim.Optimizer,
    scheduler: Any,
    epoch: int,
    patience: int,
    run_hash: str,
    geometry: GeometryConfig | None,
) -> None:
    save_checkpoint(
        model,
        path,
        geometry=geometry,
        extra={
            "epoch": epoch,
            "patience": patience,
            "run_hash": run_hash,
            "optimizer": optimizer.state_dict(),
            "scheduler": scheduler.state_dict() if scheduler is not None else None,
            "rng_state": torch.get_rng_state(),
        },
    )
