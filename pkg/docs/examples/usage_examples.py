#!/usr/bin/env python3
"""
Exemples d'utilisation de l'API Python Multiview DeepFake
=========================================================

Ce script parcourt la chaîne complète sur un petit jeu synthétique :
génération, extraction des trois vues, entraînement tiny-test,
évaluation, inférence et panneau Grad-CAM.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any

import torch

from multiview_deepfake.config import GeometryConfig, Split, SyntheticSpec, TrainConfig, ViewName, variant_config
from multiview_deepfake.data.datasets import dataset_for_split, triples_to_batch
from multiview_deepfake.data.synthetic import generate_synthetic
from multiview_deepfake.evaluation.report import evaluate, render_markdown_table, reports_frame
from multiview_deepfake.explain.gradcam import gradcam, hull_mass_ratio, overlay, render_panel, save_panel
from multiview_deepfake.model.checkpoint import load_checkpoint
from multiview_deepfake.model.detector import build_model
from multiview_deepfake.observability import configure_logging
from multiview_deepfake.training.trainer import fit
from multiview_deepfake.vision.detection import SidecarFaceDetector, detect_faces
from multiview_deepfake.vision.image import load_image
from multiview_deepfake.vision.views import extract_views


class ExampleRunner:
    """Gestionnaire d'exemples pour Multiview DeepFake."""

    def __init__(self, work_dir: Path = Path("runs/examples")):
        self.work_dir = work_dir
        self.geometry = GeometryConfig(side=64)
        self.results: list[dict[str, Any]] = []
        self.manifest = None

    def log_example(self, title: str, summary: dict[str, Any]):
        """Enregistre un exemple d'utilisation."""
        self.results.append({"timestamp": datetime.now().isoformat(), "title": title, "summary": summary})
        print(f"\n🔎 {title}")
        print("=" * (len(title) + 4))
        for key, value in summary.items():
            print(f"{key}: {value}")
        print("-" * 50)

    def run_synthetic_example(self):
        """Jeu synthétique : 20 paires réel / fake annotées."""
        data_dir = self.work_dir / "synth"
        self.manifest = generate_synthetic(SyntheticSpec(count=20, image_side=96, seed=1), data_dir)
        self.log_example(
            "Jeu synthétique",
            {"images": len(self.manifest.entries), "splits": self.manifest.split_counts()},
        )

    def run_views_example(self):
        """Les trois vues d'un visage et leur padding."""
        entry = self.manifest.split(Split.TEST)[0]
        image = load_image(self.work_dir / "synth" / entry.image_path)
        face = detect_faces(image, SidecarFaceDetector())[0]
        triple = extract_views(image, face, self.geometry)
        self.log_example(
            "Extraction des vues",
            {view.value: triple.regions[view].to_list() for view in ViewName},
        )

    def run_training_example(self):
        """Entraînement de la variante fusion + pose (encodeurs tiny-test)."""
        root = self.work_dir / "synth"
        model = build_model(variant_config("fusion-pose", feature_dim=32))
        views = model.required_views
        train_set = dataset_for_split(self.manifest, root, Split.TRAIN, views, self.geometry)
        val_set = dataset_for_split(self.manifest, root, Split.VAL, views, self.geometry)
        config = TrainConfig(epochs=10, learning_rate=1e-3, batch_size=8)
        result = fit(model, train_set, val_set, config, self.work_dir / "fusion")
        self.log_example(
            "Entraînement",
            {"best_epoch": result.run_log.best_epoch, "best_f1": result.run_log.best_f1},
        )

    def run_evaluation_example(self):
        """Evaluation du meilleur checkpoint sur le split test."""
        model = load_checkpoint(self.work_dir / "fusion" / "best.pt")
        test_set = dataset_for_split(
            self.manifest, self.work_dir / "synth", Split.TEST, model.required_views, self.geometry
        )
        report = evaluate(model, test_set, split="test")
        print(render_markdown_table(reports_frame([report.model_copy(update={"variant": "fusion-pose"})])))
        self.log_example("Évaluation", {"f1": report.f1, "auc": report.auc})

    def run_inference_example(self):
        """Score fake et Grad-CAM d'un visage truqué."""
        model = load_checkpoint(self.work_dir / "fusion" / "best.pt")
        entry = next(e for e in self.manifest.split(Split.TEST) if e.label == 1)
        image = load_image(self.work_dir / "synth" / entry.image_path)
        face = entry.faces[0]
        triple = extract_views(image, face, self.geometry)
        with torch.no_grad():
            prob = float(model.eval()(triples_to_batch([triple], model.required_views)).prob[0])
        heatmap = gradcam(model, triple, ViewName.LOCAL)
        panel = render_panel(triple.local_view, [overlay(heatmap, triple.local_view)])
        path = save_panel(panel, self.work_dir / "gradcam_local.png")
        self.log_example(
            "Inférence et Grad-CAM",
            {
                "prob_fake": round(prob, 4),
                "hull_mass": round(hull_mass_ratio(heatmap, face, triple.pads[ViewName.LOCAL]), 3),
                "panel": str(path),
            },
        )

    def save_results(self, filename: str = "multiview_examples_results.json"):
        """Sauvegarde les résultats des exemples."""
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(self.results, f, ensure_ascii=False, indent=2, default=str)
        print(f"\n📄 Résultats sauvegardés dans {filename}")

    def run_all_examples(self):
        """Lance tous les exemples d'utilisation."""
        print("🔎 DÉMONSTRATION MULTIVIEW DEEPFAKE")
        print("===================================")

        self.run_synthetic_example()
        self.run_views_example()
        self.run_training_example()
        self.run_evaluation_example()
        self.run_inference_example()

        print("\n✅ DÉMONSTRATION TERMINÉE")
        print(f"Total d'exemples exécutés: {len(self.results)}")
        print("Pour la ligne de commande complète, voir:")
        print("  uv run multiview-deepfake --help")

        self.save_results()


def main():
    """Fonction principale pour lancer les exemples."""
    configure_logging("WARNING")
    ExampleRunner().run_all_examples()


if __name__ == "__main__":
    main()
