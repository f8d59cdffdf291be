# Copyright 2025 Multiview DeepFake

"""Rapport d'évaluation et tableaux d'ablation (Precision, Recall, F1, AUC)."""

from __future__ import annotations

import json
import os
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from pydantic import Field, model_validator
from torch.utils.data import DataLoader, Dataset

from ..config import MultiviewBaseModel, config_hash
from ..errors import MetricError
from ..model.detector import DetectorModel
from ..observability import get_logger, get_tracer
from .metrics import DEFAULT_THRESHOLD, auc, confusion, prf1

logger = get_logger(__name__)

REPORT_SCHEMA_VERSION = 1
TABLE_COLUMNS = ("Precision", "Recall", "F1", "AUC")


class EvalReport(MultiviewBaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    variant: str = ""
    split: str = "test"
    n_samples: int = Field(ge=0)
    threshold: float = DEFAULT_THRESHOLD
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fn: int = Field(ge=0)
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    auc: float | None = Field(default=None, ge=0.0, le=1.0)
    precision_undefined: bool = False
    recall_undefined: bool = False
    f1_undefined: bool = False
    config_hash: str = ""
    checkpoint: str = ""

    @model_validator(mode="after")
    def _counts_cover_samples(self) -> EvalReport:
        if self.tp + self.fp + self.tn + self.fn != self.n_samples:
            raise ValueError("tp + fp + tn + fn doit égaler n_samples")
        return self

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n_samples if self.n_samples else 0.0

    def row(self) -> dict[str, float | None]:
        return dict(zip(TABLE_COLUMNS, (self.precision, self.recall, self.f1, self.auc)))


def report_from_predictions(
    probs: Sequence[float] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    threshold: float = DEFAULT_THRESHOLD,
    variant: str = "",
    split: str = "test",
) -> EvalReport:
    counts = confusion(probs, labels, threshold)
    scores = prf1(counts)
    try:
        auc_value: float | None = auc(probs, labels)
    except MetricError:
        auc_value = None
        logger.warning("AUC indéfinie sur ce split (une seule classe)", extra={"context": {"split": split}})
    return EvalReport(
        variant=variant,
        split=split,
        n_samples=counts.total,
        threshold=threshold,
        tp=counts.tp,
        fp=counts.fp,
        tn=counts.tn,
        fn=counts.fn,
        precision=scores.precision,
        recall=scores.recall,
        f1=scores.f1,
        auc=auc_value,
        precision_undefined=scores.precision_undefined,
        recall_undefined=scores.recall_undefined,
        f1_undefined=scores.f1_undefined,
    )


@torch.no_grad()
def predict_dataset(
    model: DetectorModel,
    dataset: Dataset,
    batch_size: int = 32,
    device: torch.device | str = "cpu",
) -> tuple[np.ndarray, np.ndarray]:
    """(probabilités, labels) sur tout le dataset, en mode évaluation et dans l'ordre."""
    was_training = model.training
    model.eval()
    probs, labels = [], []
    try:
        for batch in DataLoader(dataset, batch_size=batch_size, shuffle=False):
            views = {name: t.to(device) for name, t in batch["views"].items()}
            probs.append(model(views).prob.cpu().double().numpy())
            labels.append(batch["label"].numpy().astype(np.int64))
    finally:
        model.train(was_training)
    return np.concatenate(probs), np.concatenate(labels)


def evaluate(
    model: DetectorModel,
    dataset: Dataset,
    split: str = "test",
    threshold: float = DEFAULT_THRESHOLD,
    batch_size: int = 32,
    device: torch.device | str = "cpu",
) -> EvalReport:
    if len(dataset) == 0:
        raise MetricError(f"Split « {split} » vide : rien à évaluer")
    tracer = get_tracer()
    run_id = f"eval-{split}-{config_hash(model.config)[:12]}"
    tracer.start_run(run_id, "eval", {"variant": model.config.variant, "split": split})
    tracer.start_span(run_id, f"evaluate:{split}", {"n": len(dataset), "threshold": threshold})
    probs, labels = predict_dataset(model, dataset, batch_size=batch_size, device=device)
    report = report_from_predictions(probs, labels, threshold, variant=model.config.variant, split=split)
    tracer.end_span(run_id, f"evaluate:{split}", report.row())
    tracer.end_run(run_id, report.model_dump(mode="json"))
    tracer.flush()
    logger.info(
        "Évaluation terminée",
        extra={"context": {"split": split, "n": report.n_samples, "f1": round(report.f1, 4)}},
    )
    return report


def write_report(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(json.dumps(report.model_dump(mode="json"), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_report(path: Path | str) -> EvalReport:
    return EvalReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def reports_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Une ligne par variante, colonnes dans l'ordre Precision, Recall, F1, AUC."""
    frame = pd.DataFrame(
        [r.row() for r in reports],
        index=pd.Index([r.variant or f"run-{i}" for i, r in enumerate(reports)], name="Method"),
        columns=list(TABLE_COLUMNS),
    )
    return frame.astype(float)


def render_markdown_table(
    frame: pd.DataFrame,
    percent: bool = True,
    mark_best: Sequence[str] = (),
    integer_columns: Sequence[str] = (),
) -> str:
    """Tableau markdown ; une valeur manquante (AUC indéfinie) s'affiche « - ».

    Les colonnes de `mark_best` portent « ✓ » sur leur maximum ; celles de
    `integer_columns` (effectifs) sont écrites telles quelles.
    """
    best = {column: frame[column].max() for column in mark_best}
    lines = ["| " + " | ".join([frame.index.name or "Method", *frame.columns]) + " |"]
    lines.append("|" + "---|" * (len(frame.columns) + 1))
    for name, row in frame.iterrows():
        cells = []
        for column, value in row.items():
            if pd.isna(value):
                cells.append("-")
                continue
            if column in integer_columns:
                cells.append(str(int(value)))
                continue
            cell = f"{100 * value:.2f} %" if percent else f"{value:.4f}"
            if column in best and abs(value - best[column]) < 1e-9:
                cell += " ✓"
            cells.append(cell)
        lines.append("| " + " | ".join([str(name), *cells]) + " |")
    return "\n".join(lines) + "\n"


def write_table_csv(frame: pd.DataFrame, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, float_format="%.6f")
    return path
