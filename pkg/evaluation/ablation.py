# Copyright 2025 Multiview DeepFake

"""Ablation study : vues seules, fusion des vues, fusion + pose.

Chaque variante est entraînée sur un jeu synthétique par graine, puis évaluée
sur le split test. Produit un run JSON par (variante, graine), un tableau
markdown comparatif (Precision, Recall, F1, AUC) et un CSV des moyennes.

Usage:
    python -m evaluation.ablation \\
        --work-dir runs/ablation \\
        --report-dir evaluation/reports/ \\
        --seeds 0 1 2 --epochs 50
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import torch

from multiview_deepfake.config import (
    VARIANT_PRESETS,
    BackboneFamily,
    RunConfig,
    Split,
    config_hash,
    load_run_config,
    variant_config,
)
from multiview_deepfake.data.datasets import PoseDataset, dataset_for_split, samples_from_manifest
from multiview_deepfake.data.synthetic import generate_synthetic
from multiview_deepfake.evaluation.report import evaluate
from multiview_deepfake.model.checkpoint import load_checkpoint, load_pose_weights, save_pose_checkpoint
from multiview_deepfake.model.detector import build_model
from multiview_deepfake.model.encoders import PoseEncoder
from multiview_deepfake.observability import get_logger
from multiview_deepfake.training.pose import pretrain_pose
from multiview_deepfake.training.trainer import fit

from .reporter import load_runs, summary_frame, summary_table

logger = get_logger(__name__)

VARIANTS = ["local-view", "middle-view", "global-view", "view-fusion", "fusion-pose"]
SINGLE_VIEW_VARIANTS = ("local-view", "middle-view", "global-view")


def _feature_dim(config: RunConfig, family: BackboneFamily) -> int | None:
    # Seule la famille tiny-test a une dimension configurable.
    return config.model.view_backbone.feature_dim if family is BackboneFamily.TINY_TEST else None


def _pose_checkpoint(config: RunConfig, family: BackboneFamily, manifest, root: Path, out: Path) -> Path:
    """Pré-entraîne l'encodeur de pose sur toutes les images (la pose n'est pas la cible)."""
    spec = variant_config("fusion-pose", family, feature_dim=_feature_dim(config, family)).pose_backbone
    torch.manual_seed(config.seed)
    encoder = PoseEncoder(spec)
    report = pretrain_pose(encoder, PoseDataset(samples_from_manifest(manifest, root), config.geometry), config.train)
    logger.info("Encodeur de pose prêt", extra={"context": {"accuracy": report.final_accuracy}})
    return save_pose_checkpoint(encoder, out, extra={"accuracy": report.final_accuracy})


def run_variant(
    variant: str,
    family: BackboneFamily,
    config: RunConfig,
    manifest,
    root: Path,
    run_dir: Path,
    pose_checkpoint: Path | None = None,
) -> dict:
    """Entraîne une variante, recharge le meilleur checkpoint et l'évalue sur le split test."""
    model_config = variant_config(
        variant,
        family,
        feature_dim=_feature_dim(config, family),
        seed=config.seed,
        **config.model.fusion.model_dump(),
    )
    model = build_model(model_config)
    if model_config.use_pose and pose_checkpoint is not None:
        load_pose_weights(model, pose_checkpoint)
    views = model.required_views
    train_set = dataset_for_split(manifest, root, Split.TRAIN, views, config.geometry)
    val_set = dataset_for_split(manifest, root, Split.VAL, views, config.geometry)
    test_set = dataset_for_split(manifest, root, Split.TEST, views, config.geometry)

    result = fit(model, train_set, val_set, config.train, run_dir, geometry=config.geometry)
    best = load_checkpoint(result.best_checkpoint)
    report = evaluate(best, test_set, split="test", batch_size=config.train.batch_size)
    train_report = evaluate(best, train_set, split="train", batch_size=config.train.batch_size)
    return {
        "variant": variant,
        "family": family.value,
        "seed": config.seed,
        "epochs": config.train.epochs,
        "config": model_config.model_dump(mode="json"),
        "config_hash": config_hash(model_config),
        "best_epoch": result.run_log.best_epoch,
        "best_val_f1": result.run_log.best_f1,
        "train_accuracy": train_report.accuracy,
        "report": report.model_dump(mode="json"),
    }


def run_ablation(
    work_dir: Path,
    report_dir: Path,
    seeds: list[int],
    variants: list[str] | None = None,
    family: BackboneFamily = BackboneFamily.TINY_TEST,
    base: RunConfig | None = None,
    dry_run: bool = False,
) -> Path:
    """Lance tous les runs et produit le rapport comparatif."""
    variants = variants or VARIANTS
    unknown = sorted(set(variants) - set(VARIANT_PRESETS))
    if unknown:
        raise ValueError(f"Variantes inconnues: {unknown}")
    base = base or RunConfig()
    report_dir.mkdir(parents=True, exist_ok=True)

    run_paths: list[Path] = []
    for seed in seeds:
        config = base.model_copy(
            update={
                "seed": seed,
                "train": base.train.model_copy(update={"seed": seed}),
                "synthetic": base.synthetic.model_copy(update={"seed": seed}),
            }
        )
        seed_dir = work_dir / f"seed{seed}"
        data_dir = seed_dir / "synth"
        pose_checkpoint: Path | None = None
        manifest = None
        for variant in variants:
            output = report_dir / f"{family.value}_{variant}_s{seed}.json"
            if not dry_run:
                if manifest is None:
                    manifest = generate_synthetic(config.synthetic, data_dir)
                if VARIANT_PRESETS[variant]["use_pose"] and pose_checkpoint is None:
                    pose_checkpoint = _pose_checkpoint(config, family, manifest, data_dir, seed_dir / "pose.pt")
                print(f"\n{'='*60}")
                print(f"Run: {variant}  famille={family.value}  graine={seed}")
                print("="*60)
                run = run_variant(
                    variant, family, config, manifest, data_dir, seed_dir / variant, pose_checkpoint
                )
                output.write_text(json.dumps(run, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
            if output.exists():
                run_paths.append(output)

    comparison_path = report_dir / "ablation_comparison.md"
    if run_paths:
        runs = load_runs(run_paths)
        summary = summary_frame(runs)
        summary.to_csv(report_dir / "ablation_summary.csv", float_format="%.6f")
        comparison_path.write_text(_render_ablation(runs), encoding="utf-8")
        print(f"\n✓ Ablation report: {comparison_path}")
    return comparison_path


def fusion_margin(runs: list[dict]) -> float | None:
    """F1 moyen de fusion-pose moins le meilleur F1 moyen d'une vue seule (None si absent)."""
    summary = summary_frame(runs)
    singles = [v for v in SINGLE_VIEW_VARIANTS if v in summary.index]
    if "fusion-pose" not in summary.index or not singles:
        return None
    return float(summary.loc["fusion-pose", "F1"] - summary.loc[singles, "F1"].max())


def _render_ablation(runs: list[dict]) -> str:
    lines: list[str] = []
    seeds = sorted({run["seed"] for run in runs})
    lines.append("# Ablation Study : détecteur multi-vues\n")
    lines.append(
        "Vues seules, fusion des vues et fusion + pose sur le jeu synthétique "
        f"(graines {seeds}, {runs[0]['report']['n_samples']} visages de test par graine).\n"
    )

    lines.append("## Résultats agrégés (moyenne sur les graines, split test)\n")
    lines.append(summary_table(runs).rstrip())
    lines.append("\n> ✓ = meilleur score sur cette métrique.\n")

    lines.append("## Analyse\n")
    margin = fusion_margin(runs)
    if margin is None:
        lines.append("- Comparaison fusion + pose / vue seule indisponible (variantes manquantes).")
    else:
        verdict = "≥" if margin >= -0.02 else "<"
        lines.append(
            f"- F1 fusion + pose − meilleur F1 vue seule : **{100 * margin:+.2f} pts** "
            f"({verdict} −2 pts de tolérance)."
        )
    return "\n".join(lines) + "\n"


def main() -> None:
    parser = argparse.ArgumentParser(description="Ablation study du détecteur multi-vues.")
    parser.add_argument("--work-dir", type=Path, default=Path("runs/ablation"))
    parser.add_argument("--report-dir", type=Path, default=Path("evaluation/reports"))
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--variants", nargs="+", choices=VARIANTS, default=None)
    parser.add_argument(
        "--family", choices=[f.value for f in BackboneFamily], default=BackboneFamily.TINY_TEST.value
    )
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--count", type=int, default=None, help="Images par classe")
    parser.add_argument(
        "--dry-run",
        action="store_true",
        help="Génère le rapport depuis des fichiers JSON existants sans entraîner",
    )
    args = parser.parse_args()
    base = load_run_config(args.config, {"train.epochs": args.epochs, "synthetic.count": args.count})
    run_ablation(
        args.work_dir,
        args.report_dir,
        args.seeds,
        variants=args.variants,
        family=BackboneFamily(args.family),
        base=base,
        dry_run=args.dry_run,
    )


if __name__ == "__main__":
    main()
