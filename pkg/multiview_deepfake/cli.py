# Copyright 2025 Multiview DeepFake

"""Point d'entrée unique du détecteur multi-vues.

Usage:
    multiview-deepfake synth --count 100 --seed 1 --out data/synth
    multiview-deepfake preprocess --manifest data/synth/manifest.jsonl --out data/views
    multiview-deepfake pretrain-pose --manifest data/pose/manifest.jsonl --out runs/pose
    multiview-deepfake train --manifest data/views --out runs/fusion --pose-checkpoint runs/pose/pose.pt
    multiview-deepfake eval --checkpoint runs/fusion/best.pt --manifest data/views --split test --out report.json
    multiview-deepfake infer --checkpoint runs/fusion/best.pt --image photo.png
    multiview-deepfake explain --checkpoint a.pt --checkpoint b.pt --image photo.png --view local --out panel.png

Codes de sortie : 0 succès, 1 échec d'exécution, 2 erreur d'usage.
Priorité de configuration : options > fichier (``--config`` ou ``MVDF_CONFIG``) > défauts.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from .config import (
    VARIANT_PRESETS,
    ArtifactKind,
    BackboneFamily,
    GeometryConfig,
    RunConfig,
    Split,
    ViewName,
    config_hash,
    load_run_config,
)
from .errors import ConfigError, MultiviewError
from .observability import configure_logging, get_logger

logger = get_logger(__name__)

RESOLVED_CONFIG_NAME = "config.json"


# ── Utilitaires ──────────────────────────────────────────────────────────────


@contextmanager
def atomic_directory(target: Path, keep_existing: bool = False) -> Iterator[Path]:
    """Écrit dans un dossier temporaire voisin puis le renomme en `target`.

    Avec `keep_existing`, le dossier temporaire part d'une copie de `target`
    (reprise d'un entraînement) ; `target` reste intact jusqu'au renommage.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.parent / f".{target.name}.tmp-{os.getpid()}"
    if tmp.exists():
        shutil.rmtree(tmp)
    if keep_existing and target.is_dir():
        shutil.copytree(target, tmp)
    else:
        tmp.mkdir()
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if target.exists():
        shutil.rmtree(target)
    os.replace(tmp, target)


def write_resolved_config(directory: Path, config: RunConfig, name: str = RESOLVED_CONFIG_NAME, **extra: Any) -> Path:
    payload = {"config": config.model_dump(mode="json"), "config_hash": config_hash(config), **extra}
    path = Path(directory) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def _emit(args: argparse.Namespace, payload: dict[str, Any], human: str) -> None:
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        print(human)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Fusionne défauts, fichier et options ; la graine racine se propage à toutes les étapes."""
    overrides: dict[str, Any] = {}
    seed = getattr(args, "seed", None)
    if seed is not None:
        for key in ("seed", "model.seed", "train.seed", "synthetic.seed"):
            overrides[key] = seed
    variant = getattr(args, "variant", None)
    if variant is not None:
        preset = VARIANT_PRESETS[variant]
        overrides["model.variant"] = variant
        overrides["model.views"] = [ViewName(v).value for v in preset["views"]]
        overrides["model.use_pose"] = preset["use_pose"]
    family = getattr(args, "family", None)
    if family is not None:
        overrides["model.view_backbone.family"] = family
    overrides["model.view_backbone.feature_dim"] = getattr(args, "feature_dim", None)
    overrides["model.pose_backbone.family"] = getattr(args, "pose_family", None)
    overrides["model.pose_backbone.feature_dim"] = getattr(args, "pose_feature_dim", None)
    for flag, key in (
        ("margin", "geometry.margin"),
        ("expand", "geometry.expand"),
        ("side", "geometry.side"),
        ("epochs", "train.epochs"),
        ("lr", "train.learning_rate"),
        ("batch_size", "train.batch_size"),
        ("warmup_epochs", "train.warmup_epochs"),
        ("pose_epochs", "train.pose_epochs"),
        ("device", "train.device"),
        ("count", "synthetic.count"),
        ("image_side", "synthetic.image_side"),
        ("artifact", "synthetic.artifact_kind"),
    ):
        overrides[key] = getattr(args, flag, None)
    if getattr(args, "fine_tune_pose", False):
        overrides["train.freeze_pose"] = False
    if getattr(args, "warmup_epochs", None):
        overrides["model.per_view_heads"] = True
    return load_run_config(getattr(args, "config", None), overrides)


GEOMETRY_FLAGS = ("margin", "expand", "side")


def with_stored_geometry(
    args: argparse.Namespace,
    config: RunConfig,
    stored: Sequence[GeometryConfig | None],
) -> RunConfig:
    """Géométrie effective : options > géométrie enregistrée (checkpoint, index) > fichier / défauts."""
    flags = {
        name: getattr(args, name) for name in GEOMETRY_FLAGS if getattr(args, name, None) is not None
    }
    candidates = [
        GeometryConfig.model_validate({**(geometry or config.geometry).model_dump(), **flags})
        for geometry in stored
    ]
    if not candidates:
        return config
    if any(candidate != candidates[0] for candidate in candidates[1:]):
        raise ConfigError(
            "Géométries de vues différentes entre artefacts ; fixer --margin, --expand et --side"
        )
    return config.model_copy(update={"geometry": candidates[0]})


def inference_config(args: argparse.Namespace, checkpoints: Sequence[Path]) -> RunConfig:
    """Configuration d'inférence avec la géométrie d'entraînement des checkpoints."""
    from .model.checkpoint import checkpoint_geometry

    config = resolve_config(args)
    stored = []
    for path in checkpoints:
        geometry = checkpoint_geometry(path)
        if geometry is None:
            logger.warning(
                "Checkpoint sans géométrie enregistrée, géométrie de la configuration utilisée",
                extra={"context": {"checkpoint": str(path), "side": config.geometry.side}},
            )
        stored.append(geometry)
    return with_stored_geometry(args, config, stored)


def _load_data_source(path: Path):
    """Index de vues (dossier de `preprocess`) ou manifeste ; renvoie (source, racine)."""
    from .data.manifest import read_manifest
    from .vision.preprocess import INDEX_NAME, read_view_index

    path = Path(path)
    if path.is_dir() or path.name == INDEX_NAME:
        index_path = path / INDEX_NAME if path.is_dir() else path
        return read_view_index(index_path), index_path.parent
    return read_manifest(path), path.parent


# ── Sous-commandes ───────────────────────────────────────────────────────────


def cmd_synth(args: argparse.Namespace) -> int:
    from .data.synthetic import generate_synthetic

    config = resolve_config(args)
    with atomic_directory(args.out) as tmp:
        manifest = generate_synthetic(config.synthetic, tmp, workers=args.workers)
        write_resolved_config(tmp, config, command="synth")
    counts = manifest.split_counts()
    _emit(
        args,
        {"out": str(args.out), "images": len(manifest.entries), "splits": counts},
        f"✓ {len(manifest.entries)} images synthétiques → {args.out} (splits: {counts})",
    )
    return 0


def cmd_frames(args: argparse.Namespace) -> int:
    from .config import Label
    from .data.frames import extract_video_frames
    from .data.manifest import MANIFEST_SCHEMA_VERSION, write_manifest
    from .data.splits import make_splits

    config = resolve_config(args)
    with atomic_directory(args.out) as tmp:
        entries = []
        for spec in args.video:
            video, _, label = spec.rpartition(":")
            if not video or label not in ("real", "fake"):
                raise ValueError(f"--video attend CHEMIN:real|fake, reçu « {spec} »")
            entries.extend(
                extract_video_frames(video, tmp / "images", Label[label.upper()], stride=args.stride)
            )
        entries = [e.model_copy(update={"image_path": f"images/{e.image_path}"}) for e in entries]
        manifest = make_splits(entries, seed=config.seed, source=f"videos:stride={args.stride}")
        write_manifest(manifest, tmp / "manifest.jsonl")
        write_resolved_config(tmp, config, command="frames", schema_version=MANIFEST_SCHEMA_VERSION)
    _emit(
        args,
        {"out": str(args.out), "frames": len(manifest.entries)},
        f"✓ {len(manifest.entries)} images extraites → {args.out}",
    )
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    from .data.manifest import read_manifest
    from .vision.detection import SidecarFaceDetector
    from .vision.preprocess import preprocess_manifest

    config = resolve_config(args)
    manifest = read_manifest(args.manifest)
    provider = SidecarFaceDetector(annotation_dir=args.annotations)
    with atomic_directory(args.out) as tmp:
        index = preprocess_manifest(manifest, Path(args.manifest).parent, tmp, config.geometry, provider)
        write_resolved_config(tmp, config, command="preprocess")
    _emit(
        args,
        {"out": str(args.out), "faces": len(index.records)},
        f"✓ {len(index.records)} visages prétraités → {args.out}",
    )
    return 0


def cmd_pretrain_pose(args: argparse.Namespace) -> int:
    import torch

    from .data.datasets import PoseDataset, samples_from_index, samples_from_manifest
    from .model.checkpoint import save_pose_checkpoint
    from .model.encoders import PoseEncoder
    from .training.pose import pretrain_pose
    from .vision.preprocess import ViewIndex

    config = resolve_config(args)
    source, root = _load_data_source(args.manifest)
    split = None if args.split == "all" else args.split
    samples = (
        samples_from_index(source, root, split)
        if isinstance(source, ViewIndex)
        else samples_from_manifest(source, root, split)
    )
    if isinstance(source, ViewIndex):
        config = with_stored_geometry(args, config, [source.geometry])
    torch.manual_seed(config.model.seed)
    encoder = PoseEncoder(config.model.pose_backbone, config.model.pose_classes)
    report = pretrain_pose(encoder, PoseDataset(samples, config.geometry), config.train)
    out = Path(args.out)
    with atomic_directory(out) as tmp:
        save_pose_checkpoint(encoder, tmp / "pose.pt", extra={"accuracy": report.final_accuracy})
        (tmp / "pose_report.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        write_resolved_config(tmp, config, command="pretrain-pose")
    checkpoint = out / "pose.pt"
    _emit(
        args,
        {"checkpoint": str(checkpoint), "accuracy": report.final_accuracy, "checksum": report.checksum},
        f"✓ Encodeur de pose → {checkpoint} (précision {report.final_accuracy:.2%})",
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from .data.datasets import dataset_for_split
    from .model.checkpoint import load_pose_weights
    from .model.detector import build_model
    from .training.trainer import fit

    from .vision.preprocess import ViewIndex

    config = resolve_config(args)
    source, root = _load_data_source(args.manifest)
    if isinstance(source, ViewIndex):
        config = with_stored_geometry(args, config, [source.geometry])
    model = build_model(config.model)
    if args.pose_checkpoint:
        load_pose_weights(model, args.pose_checkpoint)
    views = model.required_views
    train_set = dataset_for_split(source, root, Split.TRAIN, views, config.geometry)
    val_set = dataset_for_split(source, root, Split.VAL, views, config.geometry)
    out = Path(args.out)
    # La reprise part d'une copie : `out` ne change qu'à la fin de l'exécution.
    with atomic_directory(out, keep_existing=args.resume) as tmp:
        write_resolved_config(tmp, config, command="train", data=str(args.manifest))
        result = fit(
            model, train_set, val_set, config.train, tmp, resume=args.resume, geometry=config.geometry
        )
    log = result.run_log
    best_checkpoint = out / result.best_checkpoint.name
    _emit(
        args,
        {
            "best_checkpoint": str(best_checkpoint),
            "best_epoch": log.best_epoch,
            "best_f1": log.best_f1,
            "epochs": len(log.records),
        },
        f"✓ Entraînement terminé : meilleur epoch {log.best_epoch} (F1 val {log.best_f1}) → {best_checkpoint}",
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from .data.datasets import dataset_for_split
    from .evaluation.report import evaluate, render_markdown_table, reports_frame, write_report, write_table_csv
    from .model.checkpoint import load_checkpoint

    config = inference_config(args, [args.checkpoint])
    model = load_checkpoint(args.checkpoint)
    source, root = _load_data_source(args.manifest)
    dataset = dataset_for_split(source, root, args.split, model.required_views, config.geometry)
    report = evaluate(model, dataset, split=args.split, threshold=args.threshold, batch_size=config.train.batch_size)
    report = report.model_copy(
        update={"checkpoint": str(args.checkpoint), "config_hash": config_hash(model.config)}
    )
    out = Path(args.out)
    write_report(report, out)
    write_resolved_config(out.parent, config, name=f"{out.stem}.config.json", command="eval")
    frame = reports_frame([report])
    if args.csv:
        write_table_csv(frame, args.csv)
    _emit(args, report.model_dump(mode="json"), render_markdown_table(frame).rstrip())
    return 0


def _infer_records(model, paths: Sequence[Path], provider, geometry) -> list[dict[str, Any]]:
    import torch

    from .data.datasets import triples_to_batch
    from .model.detector import pose_class_from_logits
    from .vision.detection import detect_faces
    from .vision.image import load_image
    from .vision.views import extract_views

    records: list[dict[str, Any]] = []
    model.eval()
    for path in paths:
        image = load_image(path)
        faces = detect_faces(image, provider)
        if not faces:
            continue
        triples = [extract_views(image, face, geometry) for face in faces]
        with torch.no_grad():
            out = model(triples_to_batch(triples, model.required_views))
        poses = pose_class_from_logits(out.pose_logits)
        for index, face in enumerate(faces):
            records.append(
                {
                    "image": str(path),
                    "face_index": index,
                    "box": face.box.to_list(),
                    "prob_fake": float(out.prob[index]),
                    "pose_class": int(poses[index]),
                }
            )
    return records


def cmd_infer(args: argparse.Namespace) -> int:
    from .model.checkpoint import load_checkpoint
    from .vision.detection import SidecarFaceDetector

    config = inference_config(args, [args.checkpoint])
    model = load_checkpoint(args.checkpoint)
    provider = SidecarFaceDetector(annotation_dir=args.annotations)
    records = _infer_records(model, [Path(p) for p in args.image], provider, config.geometry)
    text = json.dumps(records, ensure_ascii=False, indent=None if args.json else 2)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        write_resolved_config(out.parent, config, name=f"{out.stem}.config.json", command="infer")
    print(text)
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    from .explain.gradcam import gradcam, hull_mass_ratio, overlay, render_panel, save_panel
    from .model.checkpoint import load_checkpoint
    from .vision.detection import SidecarFaceDetector, detect_faces
    from .vision.image import load_image
    from .vision.views import extract_views

    config = inference_config(args, args.checkpoint)
    view = ViewName(args.view)
    image = load_image(args.image)
    faces = detect_faces(image, SidecarFaceDetector(annotation_dir=args.annotations))
    if not faces:
        raise ValueError(f"Aucun visage annoté pour {args.image}")
    if not 0 <= args.face < len(faces):
        raise ValueError(f"Visage {args.face} absent ({len(faces)} détecté(s))")
    face = faces[args.face]
    triple = extract_views(image, face, config.geometry)
    overlays, details = [], []
    for checkpoint in args.checkpoint:
        model = load_checkpoint(checkpoint)
        heatmap = gradcam(model, triple, view, layer=args.layer)
        overlays.append(overlay(heatmap, triple.view(view), alpha=args.alpha))
        details.append(
            {
                "checkpoint": str(checkpoint),
                "layer": heatmap.layer,
                "grid": list(heatmap.shape),
                "degenerate": heatmap.degenerate,
                "hull_mass": hull_mass_ratio(heatmap, face, triple.pads[view]),
            }
        )
    panel = save_panel(render_panel(triple.view(view), overlays), args.out)
    write_resolved_config(Path(args.out).parent, config, name=f"{Path(args.out).stem}.config.json", command="explain")
    _emit(
        args,
        {"panel": str(panel), "view": view.value, "heatmaps": details},
        f"✓ Panneau Grad-CAM ({view.value}, {len(overlays)} modèle(s)) → {panel}",
    )
    return 0


# ── Analyseur ────────────────────────────────────────────────────────────────


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="Fichier JSON de configuration")
    parser.add_argument("--json", action="store_true", help="Sortie standard lisible par machine")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-json", action="store_true", help="Journaux en JSON lines")
    parser.add_argument("--seed", type=int, default=None, help="Graine racine")


def _add_geometry(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--margin", type=float, default=None, help="Marge de l'enveloppe (px, défaut 15)")
    parser.add_argument("--expand", type=float, default=None, help="Élargissement de la vue globale (px, défaut 20)")
    parser.add_argument("--side", type=int, default=None, help="Côté des vues (px, défaut 224)")


def _add_model(parser: argparse.ArgumentParser) -> None:
    families = [f.value for f in BackboneFamily]
    parser.add_argument("--variant", choices=sorted(VARIANT_PRESETS), default=None)
    parser.add_argument("--family", choices=families, default=None, help="Famille des encodeurs de vue")
    parser.add_argument("--feature-dim", type=int, default=None)
    parser.add_argument("--pose-family", choices=families, default=None)
    parser.add_argument("--pose-feature-dim", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiview-deepfake",
        description="Détecteur DeepFake multi-vues (vues globale/médiane/locale + pose).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Génère un jeu synthétique annoté")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=int, default=None, help="Images par classe")
    p.add_argument("--image-side", type=int, default=None)
    p.add_argument("--artifact", choices=[k.value for k in ArtifactKind], default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("frames", help="Extrait une image sur N de vidéos")
    _add_common(p)
    p.add_argument("--video", action="append", required=True, help="CHEMIN:real|fake (répétable)")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_frames)

    p = sub.add_parser("preprocess", help="Pré-calcule les trois vues de chaque visage")
    _add_common(p)
    _add_geometry(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--annotations", type=Path, default=None, help="Dossier des sidecars")
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("pretrain-pose", help="Pré-entraîne l'encodeur de pose (13 classes)")
    _add_common(p)
    _add_geometry(p)
    p.add_argument("--manifest", type=Path, required=True, help="Manifeste ou dossier de vues")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--split", choices=["all", *[s.value for s in Split]], default="all")
    p.add_argument("--pose-family", choices=[f.value for f in BackboneFamily], default=None)
    p.add_argument("--pose-feature-dim", type=int, default=None)
    p.add_argument("--pose-epochs", type=int, default=None)
    p.add_argument("--device", default=None)
    p.set_defaults(handler=cmd_pretrain_pose)

    p = sub.add_parser("train", help="Entraîne le détecteur")
    _add_common(p)
    _add_geometry(p)
    _add_model(p)
    p.add_argument("--manifest", type=Path, required=True, help="Manifeste ou dossier de vues")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--warmup-epochs", type=int, default=None)
    p.add_argument("--pose-checkpoint", type=Path, default=None)
    p.add_argument("--fine-tune-pose", action="store_true")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--device", default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="Évalue un checkpoint sur un split")
    _add_common(p)
    _add_geometry(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True, help="Manifeste ou dossier de vues")
    p.add_argument("--split", choices=[s.value for s in Split], default="test")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--csv", type=Path, default=None, help="Tableau Precision/Recall/F1/AUC")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("infer", help="Score fake par visage détecté")
    _add_common(p)
    _add_geometry(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--image", action="append", required=True)
    p.add_argument("--annotations", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("explain", help="Panneau Grad-CAM (original | un modèle par checkpoint)")
    _add_common(p)
    _add_geometry(p)
    p.add_argument("--checkpoint", type=Path, action="append", required=True)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--view", choices=[v.value for v in ViewName], default=ViewName.LOCAL.value)
    p.add_argument("--face", type=int, default=0)
    p.add_argument("--layer", default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--annotations", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_explain)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level, json_lines=args.log_json)
    try:
        return args.handler(args)
    except (MultiviewError, OSError, ValueError, RuntimeError) as exc:
        # RuntimeError : erreurs torch (formes, périphérique, état incohérent).
        logger.error(
            "Échec de la commande",
            extra={
                "context": {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
            },
        )
        print(f"Erreur: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
