# Copyright 2025 Multiview DeepFake

"""Rapport markdown comparatif à partir d'un ou plusieurs runs JSON d'ablation.

Usage:
    python -m evaluation.reporter evaluation/reports/*.json \\
        --output evaluation/reports/comparison.md
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import pandas as pd

from multiview_deepfake.evaluation.report import TABLE_COLUMNS, render_markdown_table

VARIANT_ORDER = ("local-view", "middle-view", "global-view", "view-fusion", "fusion-pose")


def load_runs(paths: list[Path]) -> list[dict]:
    runs = []
    for path in paths:
        with path.open(encoding="utf-8") as f:
            data = json.load(f)
        data["_path"] = str(path)
        data["_name"] = path.stem
        runs.append(data)
    return runs


def runs_frame(runs: list[dict]) -> pd.DataFrame:
    """Une ligne par (variante, graine) : métriques de test et précision d'entraînement."""
    rows = []
    for run in runs:
        report = run["report"]
        rows.append(
            {
                "variant": run["variant"],
                "family": run["family"],
                "seed": run["seed"],
                "Precision": report["precision"],
                "Recall": report["recall"],
                "F1": report["f1"],
                "AUC": float("nan") if report["auc"] is None else report["auc"],
                "train_accuracy": run["train_accuracy"],
            }
        )
    return pd.DataFrame(rows)


def summary_frame(runs: list[dict]) -> pd.DataFrame:
    """Moyenne sur les graines, indexée par variante (ordre des lignes d'ablation)."""
    frame = runs_frame(runs)
    columns = [*TABLE_COLUMNS, "train_accuracy"]
    summary = frame.groupby("variant")[columns].mean(numeric_only=True)
    summary["seeds"] = frame.groupby("variant")["seed"].count()
    order = [v for v in VARIANT_ORDER if v in summary.index]
    order += sorted(v for v in summary.index if v not in VARIANT_ORDER)
    summary = summary.loc[order]
    summary.index.name = "Method"
    return summary


def summary_table(runs: list[dict]) -> str:
    """Tableau des moyennes par variante ; ✓ marque le meilleur score de chaque métrique."""
    summary = summary_frame(runs).rename(columns={"train_accuracy": "Acc. train", "seeds": "Graines"})
    summary.index.name = "Méthode"
    return render_markdown_table(summary, mark_best=TABLE_COLUMNS, integer_columns=("Graines",))


def render_report(runs: list[dict]) -> str:
    lines: list[str] = []
    families = sorted({run["family"] for run in runs})
    lines.append("# Rapport d'évaluation : détecteur multi-vues\n")
    lines.append(f"Runs comparés: **{len(runs)}** (familles: {', '.join(families)})\n")

    lines.append("## Configuration des runs\n")
    lines.append("| Run | Variante | Famille | Graine | Epochs | N test |")
    lines.append("|-----|----------|---------|--------|--------|--------|")
    for run in runs:
        lines.append(
            f"| {run['_name']} | {run['variant']} | {run['family']} | {run['seed']} "
            f"| {run['epochs']} | {run['report']['n_samples']} |"
        )

    lines.append("\n## Moyennes par variante (split test)\n")
    lines.append(summary_table(runs).rstrip())
    lines.append("\n> ✓ = meilleur score sur cette métrique.\n")

    lines.append("## Détail par graine\n")
    frame = runs_frame(runs)
    for variant, group in frame.groupby("variant", sort=False):
        f1s = ", ".join(f"{v:.3f}" for v in group["F1"])
        lines.append(f"- `{variant}` : F1 = [{f1s}]")

    return "\n".join(lines) + "\n"


def main() -> None:
    parser = argparse.ArgumentParser(description="Génère un rapport comparatif.")
    parser.add_argument("runs", nargs="+", type=Path)
    parser.add_argument(
        "--output",
        type=Path,
        default=Path("evaluation/reports/comparison.md"),
    )
    args = parser.parse_args()

    runs = load_runs(args.runs)
    markdown = render_report(runs)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(markdown, encoding="utf-8")
    print(f"✓ Rapport: {args.output}")


if __name__ == "__main__":
    main()
