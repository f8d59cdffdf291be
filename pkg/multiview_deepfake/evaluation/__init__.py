# Copyright 2025 Multiview DeepFake

"""Métriques (confusion, précision/rappel/F1, AUC) et rapports d'évaluation."""

from .metrics import PRF1, Confusion, accuracy, auc, confusion, prf1, specificity
from .report import (
    TABLE_COLUMNS,
    EvalReport,
    evaluate,
    predict_dataset,
    read_report,
    render_markdown_table,
    report_from_predictions,
    reports_frame,
    write_report,
    write_table_csv,
)

__all__ = [
    "PRF1",
    "TABLE_COLUMNS",
    "Confusion",
    "EvalReport",
    "accuracy",
    "auc",
    "confusion",
    "evaluate",
    "predict_dataset",
    "prf1",
    "read_report",
    "render_markdown_table",
    "report_from_predictions",
    "reports_frame",
    "specificity",
    "write_report",
    "write_table_csv",
]
