# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Tests de l'interface en ligne de commande."""

import json

import numpy as np
import pytest
from PIL import Image

from multiview_deepfake.cli import atomic_directory, build_parser, main, resolve_config
from multiview_deepfake.config import GeometryConfig, RunConfig, config_hash, variant_config
from multiview_deepfake.model.checkpoint import checkpoint_geometry, save_checkpoint
from multiview_deepfake.model.detector import build_model
from multiview_deepfake.vision.detection import sidecar_path, write_sidecar
from multiview_deepfake.vision.image import ImageBuffer, save_image
from tests.conftest import make_face, tiny_model_config


@pytest.fixture
def checkpoint(tmp_path):
    return save_checkpoint(build_model(tiny_model_config()), tmp_path / "model.pt")


@pytest.fixture
def two_faces(tmp_path):
    """Image 400×400 annotée de deux visages."""
    pixels = np.random.default_rng(5).integers(0, 256, size=(400, 400, 3), dtype=np.uint8)
    path = save_image(ImageBuffer(pixels), tmp_path / "group.png")
    write_sidecar(
        sidecar_path(path),
        [make_face(box=(40.0, 60.0, 170.0, 210.0)), make_face(box=(220.0, 150.0, 350.0, 300.0))],
    )
    return path


class TestArguments:
    """Tests des codes de sortie et de l'analyse des options."""

    def test_help(self, capsys):
        """Test que --help sort avec le code 0."""
        assert main(["--help"]) == 0
        assert "multiview-deepfake" in capsys.readouterr().out

    def test_unknown_flag(self):
        """Test qu'une option inconnue est une erreur d'usage (code 2)."""
        assert main(["synth", "--out", "x", "--bogus"]) == 2

    def test_missing_required_flag(self, capsys):
        """Test que eval sans --checkpoint donne le code 2 et nomme l'option."""
        assert main(["eval", "--manifest", "m.jsonl", "--out", "r.json"]) == 2
        assert "--checkpoint" in capsys.readouterr().err

    def test_missing_checkpoint_file(self, tmp_path, two_faces, capsys):
        """Test qu'un checkpoint absent est un échec d'exécution (code 1)."""
        code = main(["infer", "--checkpoint", str(tmp_path / "absent.pt"), "--image", str(two_faces)])
        assert code == 1
        assert "Erreur" in capsys.readouterr().err

    def test_invalid_config_file(self, tmp_path):
        """Test qu'une clé inconnue dans --config est un échec d'exécution."""
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"train": {"epochz": 3}}), encoding="utf-8")
        assert main(["synth", "--out", str(tmp_path / "s"), "--config", str(config)]) == 1

    def test_seed_and_options_override_file(self, tmp_path):
        """Test la priorité options > fichier > défauts et la propagation de la graine."""
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps({"train": {"epochs": 7, "batch_size": 3}, "geometry": {"margin": 9}}),
            encoding="utf-8",
        )
        args = build_parser().parse_args(
            ["train", "--manifest", "m", "--out", "o", "--config", str(config), "--epochs", "2", "--seed", "4"]
        )
        resolved = resolve_config(args)
        assert resolved.train.epochs == 2
        assert resolved.train.batch_size == 3
        assert resolved.geometry.margin == 9
        assert resolved.geometry.expand == 20
        assert (resolved.seed, resolved.model.seed, resolved.train.seed, resolved.synthetic.seed) == (4, 4, 4, 4)

    def test_variant_and_warmup(self):
        """Test qu'une variante fixe les vues et que le pré-chauffage active les têtes par vue."""
        args = build_parser().parse_args(
            ["train", "--manifest", "m", "--out", "o", "--variant", "local-view", "--warmup-epochs", "2"]
        )
        resolved = resolve_config(args)
        assert [v.value for v in resolved.model.views] == ["local"]
        assert not resolved.model.use_pose
        assert resolved.model.per_view_heads


class TestSynth:
    """Tests de la sous-commande synth."""

    def test_writes_resolved_config(self, tmp_path, capsys):
        """Test le manifeste, les images et la configuration résolue avec son empreinte."""
        out = tmp_path / "synth"
        assert main(["synth", "--out", str(out), "--count", "10", "--image-side", "96", "--seed", "1", "--json"]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["images"] == 20
        payload = json.loads((out / "config.json").read_text(encoding="utf-8"))
        assert payload["config"]["synthetic"]["seed"] == 1
        assert payload["config_hash"] == config_hash(RunConfig.model_validate(payload["config"]))
        assert (out / "manifest.jsonl").exists()
        assert not list(tmp_path.glob(".synth.tmp-*"))

    def test_deterministic(self, tmp_path):
        """Test que deux générations de même graine sont identiques."""
        for name in ("a", "b"):
            assert main(["synth", "--out", str(tmp_path / name), "--count", "10", "--image-side", "96", "--seed", "2"]) == 0
        first, second = tmp_path / "a", tmp_path / "b"
        assert (first / "manifest.jsonl").read_bytes() == (second / "manifest.jsonl").read_bytes()
        assert (first / "images" / "fake_0003.png").read_bytes() == (second / "images" / "fake_0003.png").read_bytes()


class TestInfer:
    """Tests de la sous-commande infer."""

    def test_one_record_per_face(self, checkpoint, two_faces, capsys):
        """Test deux visages → deux enregistrements, et résultat identique d'un appel à l'autre."""
        argv = ["infer", "--checkpoint", str(checkpoint), "--image", str(two_faces), "--side", "32", "--json"]
        assert main(argv) == 0
        first = capsys.readouterr().out.strip().splitlines()[-1]
        assert main(argv) == 0
        second = capsys.readouterr().out.strip().splitlines()[-1]
        assert first == second
        records = json.loads(first)
        assert [r["face_index"] for r in records] == [0, 1]
        for record in records:
            assert 0.0 <= record["prob_fake"] <= 1.0
            assert 0 <= record["pose_class"] < 13
        assert records[0]["box"] == [40.0, 60.0, 170.0, 210.0]

    def test_no_face(self, tmp_path, checkpoint, capsys):
        """Test qu'une image sans visage donne une liste vide."""
        path = save_image(ImageBuffer.zeros(64, 64), tmp_path / "empty.png")
        sidecar_path(path).write_text("", encoding="utf-8")
        assert main(["infer", "--checkpoint", str(checkpoint), "--image", str(path), "--json"]) == 0
        assert capsys.readouterr().out.strip().splitlines()[-1] == "[]"

    def test_output_file(self, tmp_path, checkpoint, two_faces):
        """Test l'écriture du résultat et de la configuration résolue à côté."""
        out = tmp_path / "out" / "scores.json"
        assert main(["infer", "--checkpoint", str(checkpoint), "--image", str(two_faces), "--side", "32", "--out", str(out)]) == 0
        assert len(json.loads(out.read_text(encoding="utf-8"))) == 2
        assert (out.parent / "scores.config.json").exists()


    def test_trained_geometry_is_default(self, tmp_path, two_faces, capsys):
        """Test qu'infer sans --side reprend la géométrie enregistrée dans le checkpoint."""
        model = build_model(tiny_model_config())
        path = save_checkpoint(model, tmp_path / "side32.pt", geometry=GeometryConfig(side=32))
        base = ["infer", "--checkpoint", str(path), "--image", str(two_faces), "--json"]
        assert main(base) == 0
        default = capsys.readouterr().out.strip().splitlines()[-1]
        assert main([*base, "--side", "32"]) == 0
        explicit = capsys.readouterr().out.strip().splitlines()[-1]
        assert default == explicit
        out = tmp_path / "scores.json"
        assert main([*base, "--side", "48", "--out", str(out)]) == 0
        resolved = json.loads((tmp_path / "scores.config.json").read_text(encoding="utf-8"))
        assert resolved["config"]["geometry"]["side"] == 48

    def test_checkpoint_without_geometry_warns(self, checkpoint, two_faces, caplog):
        """Test qu'un checkpoint sans géométrie retombe sur la configuration avec un avertissement."""
        assert main(["infer", "--checkpoint", str(checkpoint), "--image", str(two_faces), "--json"]) == 0
        assert any("sans géométrie" in r.getMessage() for r in caplog.records)

    def test_torch_runtime_error_is_exit_code_one(self, checkpoint, two_faces, monkeypatch, capsys):
        """Test qu'une RuntimeError de torch donne le code 1 et non une trace."""

        def failing_load(*_args, **_kwargs):
            raise RuntimeError("size mismatch for fusion.stage1.0.weight")

        monkeypatch.setattr("multiview_deepfake.model.checkpoint.load_checkpoint", failing_load)
        assert main(["infer", "--checkpoint", str(checkpoint), "--image", str(two_faces)]) == 1
        assert "size mismatch" in capsys.readouterr().err



class TestExplain:
    """Tests de la sous-commande explain."""

    def test_two_checkpoint_panel(self, tmp_path, two_faces, capsys):
        """Test original | modèle A | modèle B, largeur 3 × 224 + 8."""
        first = save_checkpoint(build_model(tiny_model_config(seed=0)), tmp_path / "a.pt")
        second = save_checkpoint(build_model(variant_config("local-view", feature_dim=16, seed=1)), tmp_path / "b.pt")
        out = tmp_path / "panel.png"
        argv = ["explain", "--checkpoint", str(first), "--checkpoint", str(second)]
        argv += ["--image", str(two_faces), "--face", "1", "--out", str(out), "--json"]
        assert main(argv) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert [h["layer"] for h in summary["heatmaps"]] == ["act2", "act2"]
        with Image.open(out) as panel:
            assert panel.size == (3 * 224 + 8, 224)

    def test_checkpoints_with_different_geometries(self, tmp_path, two_faces):
        """Test que des géométries différentes sans option explicite sont refusées."""
        model = build_model(tiny_model_config())
        first = save_checkpoint(model, tmp_path / "a.pt", geometry=GeometryConfig(side=32))
        second = save_checkpoint(model, tmp_path / "b.pt", geometry=GeometryConfig(side=64))
        argv = ["explain", "--checkpoint", str(first), "--checkpoint", str(second)]
        argv += ["--image", str(two_faces), "--out", str(tmp_path / "p.png")]
        assert main(argv) == 1
        assert main([*argv, "--side", "48"]) == 0

    def test_face_out_of_range(self, tmp_path, checkpoint, two_faces):
        """Test qu'un index de visage absent est un échec d'exécution."""
        argv = ["explain", "--checkpoint", str(checkpoint), "--image", str(two_faces)]
        assert main([*argv, "--face", "5", "--out", str(tmp_path / "p.png")]) == 1


class TestAtomicDirectory:
    """Tests de l'écriture atomique des dossiers de sortie."""

    def test_interrupted_run_keeps_previous_state(self, tmp_path):
        """Test qu'une exécution interrompue laisse le dossier cible intact."""
        target = tmp_path / "run"
        target.mkdir()
        (target / "last.pt").write_text("epoch 2", encoding="utf-8")
        with pytest.raises(KeyboardInterrupt):
            with atomic_directory(target, keep_existing=True) as tmp:
                assert (tmp / "last.pt").read_text(encoding="utf-8") == "epoch 2"
                (tmp / "last.pt").write_text("epoch 3 (partiel)", encoding="utf-8")
                raise KeyboardInterrupt
        assert (target / "last.pt").read_text(encoding="utf-8") == "epoch 2"
        assert sorted(p.name for p in tmp_path.iterdir()) == ["run"]

    def test_completed_run_replaces_target(self, tmp_path):
        """Test que le dossier n'est publié qu'en fin d'exécution, sans ancien contenu."""
        target = tmp_path / "run"
        target.mkdir()
        (target / "stale.txt").write_text("x", encoding="utf-8")
        with atomic_directory(target) as tmp:
            (tmp / "best.pt").write_text("ok", encoding="utf-8")
            assert not (target / "best.pt").exists()
        assert sorted(p.name for p in target.iterdir()) == ["best.pt"]


@pytest.mark.slow
def test_end_to_end(tmp_path, capsys):
    """Test synth → preprocess → train → eval sur un petit jeu synthétique."""
    data, views, run = tmp_path / "synth", tmp_path / "views", tmp_path / "run"
    assert main(["synth", "--out", str(data), "--count", "10", "--image-side", "96"]) == 0
    assert main(["preprocess", "--manifest", str(data / "manifest.jsonl"), "--out", str(views), "--side", "32"]) == 0
    argv = ["train", "--manifest", str(views), "--out", str(run)]
    assert main([*argv, "--epochs", "2", "--batch-size", "4", "--lr", "1e-3"]) == 0
    assert (run / "best.pt").exists() and (run / "last.pt").exists()
    assert checkpoint_geometry(run / "best.pt").side == 32
    report = tmp_path / "report.json"
    csv = tmp_path / "table.csv"
    argv = ["eval", "--checkpoint", str(run / "best.pt"), "--manifest", str(views)]
    assert main([*argv, "--out", str(report), "--csv", str(csv)]) == 0
    capsys.readouterr()
    payload = json.loads(report.read_text(encoding="utf-8"))
    assert payload["tp"] + payload["fp"] + payload["tn"] + payload["fn"] == payload["n_samples"] > 0
    assert payload["checkpoint"] == str(run / "best.pt")
    assert csv.exists()
