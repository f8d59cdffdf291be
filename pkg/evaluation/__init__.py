# Copyright 2025 Multiview DeepFake

"""Framework d'ablation du détecteur multi-vues.

Variantes comparées:
- Vues seules: local-view, middle-view, global-view
- Fusion: view-fusion (trois vues), fusion-pose (trois vues + pose)
- Métriques: Precision, Recall, F1, AUC sur le split test, moyennées sur les graines
"""

from .ablation import VARIANTS, fusion_margin, run_ablation, run_variant
from .reporter import load_runs, render_report, runs_frame, summary_frame, summary_table

__all__ = [
    "VARIANTS",
    "fusion_margin",
    "load_runs",
    "render_report",
    "run_ablation",
    "run_variant",
    "runs_frame",
    "summary_frame",
    "summary_table",
]
