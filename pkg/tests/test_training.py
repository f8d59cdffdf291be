# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Tests de l'entraînement : perte, chargeur, boucle fit, reprise, pré-chauffage, pose."""

import math

import pytest
import torch
from pydantic import ValidationError

from multiview_deepfake.config import BackboneSpec, FusionConfig, TrainConfig
from multiview_deepfake.errors import (
    ConfigError,
    InsufficientDataError,
    MissingPoseClassesError,
    NumericFaultError,
)
from multiview_deepfake.model.checkpoint import parameter_checksum, read_checkpoint
from multiview_deepfake.model.detector import build_model
from multiview_deepfake.model.encoders import PoseEncoder
from multiview_deepfake.training.losses import bce_loss
from multiview_deepfake.training.pose import pretrain_pose
from multiview_deepfake.training.runtime import make_loader
from multiview_deepfake.training.trainer import EpochRecord, RunLog, fit
from tests.conftest import TensorPoseDataset, TensorViewsDataset, tiny_model_config


def epoch_record(epoch: int, f1: float = 0.5, is_best: bool = False) -> EpochRecord:
    return EpochRecord(
        epoch=epoch,
        learning_rate=1e-4,
        train_loss=0.7,
        train_accuracy=0.5,
        val_loss=0.7,
        val_precision=0.5,
        val_recall=0.5,
        val_f1=f1,
        is_best=is_best,
    )


class TestLoss:
    """Tests de l'entropie croisée binaire."""

    def test_closed_forms(self):
        """Test ln 2, −ln 0.9 et le bornage à 1e-7."""
        p = torch.tensor([0.5, 0.5], dtype=torch.float64)
        y = torch.tensor([0.0, 1.0], dtype=torch.float64)
        assert float(bce_loss(p, y)) == pytest.approx(math.log(2), abs=1e-12)
        assert float(bce_loss(torch.tensor([0.9]), torch.tensor([1.0]))) == pytest.approx(-math.log(0.9), rel=1e-6)
        clamped = bce_loss(torch.tensor([0.0], dtype=torch.float64), torch.tensor([1.0], dtype=torch.float64))
        assert float(clamped) == pytest.approx(-math.log(1e-7), rel=1e-9)
        assert math.isfinite(float(clamped))

    def test_matches_loop_oracle(self):
        """Test contre une boucle Python explicite (1e-9, float64)."""
        generator = torch.Generator().manual_seed(0)
        p = torch.rand(200, generator=generator, dtype=torch.float64)
        y = (torch.rand(200, generator=generator, dtype=torch.float64) > 0.5).double()
        expected = 0.0
        for pi, yi in zip(p.tolist(), y.tolist()):
            pi = min(max(pi, 1e-7), 1 - 1e-7)
            expected -= yi * math.log(pi) + (1 - yi) * math.log(1 - pi)
        assert float(bce_loss(p, y)) == pytest.approx(expected / 200, abs=1e-9)

    def test_shape_mismatch(self):
        """Test que des formes différentes sont refusées."""
        with pytest.raises(ValueError):
            bce_loss(torch.zeros(3), torch.zeros(4))


class TestLoader:
    """Tests du chargeur déterministe."""

    def test_drops_single_sample_tail(self):
        """Test qu'un dernier lot de taille 1 est écarté en mode batch-norm."""
        dataset = TensorViewsDataset(n=9)
        assert [len(b["label"]) for b in make_loader(dataset, 4, seed=0)] == [4, 4]
        assert [len(b["label"]) for b in make_loader(dataset, 4, seed=0, shuffle=False)] == [4, 4, 1]

    def test_same_seed_same_order(self):
        """Test que la graine fixe l'ordre de mélange."""
        dataset = TensorViewsDataset(n=12)
        a = [b["pose"].tolist() for b in make_loader(dataset, 4, seed=5)]
        b = [b["pose"].tolist() for b in make_loader(dataset, 4, seed=5)]
        assert a == b


class TestFit:
    """Tests de la boucle d'entraînement."""

    def test_batch_size_below_two_rejected(self):
        """Test que batch_size=1 est refusé dès la validation (batch-norm de la fusion)."""
        with pytest.raises(ValidationError):
            TrainConfig(batch_size=1)

    def test_odd_dataset_with_pairs_of_samples(self, tmp_path, tiny_config):
        """Test qu'un dernier lot d'un seul échantillon n'interrompt pas l'entraînement."""
        config = TrainConfig(epochs=1, learning_rate=1e-3, batch_size=2)
        train, val = TensorViewsDataset(n=9), TensorViewsDataset(n=5, seed=1)
        result = fit(build_model(tiny_config), train, val, config, tmp_path)
        assert [r.epoch for r in result.run_log.records] == [1]

    def test_single_training_sample_rejected(self, tmp_path, tiny_config, fast_train_config):
        """Test qu'un split d'entraînement d'un seul échantillon lève InsufficientDataError."""
        train, val = TensorViewsDataset(n=1), TensorViewsDataset(n=6)
        with pytest.raises(InsufficientDataError):
            fit(build_model(tiny_config), train, val, fast_train_config, tmp_path)

    def test_zero_learning_rate_keeps_parameters(self, tmp_path, tiny_config, views_dataset):
        """Test qu'un taux d'apprentissage nul laisse les paramètres inchangés."""
        model = build_model(tiny_config)
        before = parameter_checksum(model)
        config = TrainConfig(epochs=2, learning_rate=0.0, batch_size=4)
        fit(model, views_dataset, TensorViewsDataset(n=6, seed=1), config, tmp_path)
        assert parameter_checksum(model) == before

    def test_writes_run_artifacts(self, tmp_path, tiny_config, views_dataset, fast_train_config):
        """Test best.pt, last.pt et le journal d'exécution."""
        model = build_model(tiny_config)
        result = fit(model, views_dataset, TensorViewsDataset(n=6, seed=1), fast_train_config, tmp_path)
        assert result.best_checkpoint.exists() and result.last_checkpoint.exists()
        assert [r.epoch for r in result.run_log.records] == [1, 2]
        assert result.run_log.records[0].is_best
        assert RunLog.read(tmp_path / "run_log.jsonl").numeric_view() == result.run_log.numeric_view()
        extra = read_checkpoint(result.last_checkpoint)["extra"]
        assert extra["epoch"] == 2
        assert {"optimizer", "rng_state", "run_hash"} <= set(extra)

    def test_deterministic(self, tmp_path, tiny_config, views_dataset, fast_train_config):
        """Test que deux exécutions identiques donnent les mêmes poids."""
        val = TensorViewsDataset(n=6, seed=1)
        a = build_model(tiny_config)
        fit(a, views_dataset, val, fast_train_config, tmp_path / "a")
        b = build_model(tiny_config)
        fit(b, views_dataset, val, fast_train_config, tmp_path / "b")
        assert parameter_checksum(a) == parameter_checksum(b)

    def test_resume_matches_uninterrupted(self, tmp_path, tiny_config, views_dataset):
        """Test qu'une reprise après 2 epochs rejoint exactement une exécution de 4 epochs."""
        val = TensorViewsDataset(n=6, seed=1)
        full = TrainConfig(epochs=4, learning_rate=1e-3, batch_size=4)
        reference = build_model(tiny_config)
        expected = fit(reference, views_dataset, val, full, tmp_path / "full")

        partial = build_model(tiny_config)
        fit(partial, views_dataset, val, full.model_copy(update={"epochs": 2}), tmp_path / "resumed")
        resumed = build_model(tiny_config)
        result = fit(resumed, views_dataset, val, full, tmp_path / "resumed", resume=True)

        assert parameter_checksum(resumed) == parameter_checksum(reference)
        assert result.run_log.numeric_view() == expected.run_log.numeric_view()

    def test_resume_with_other_config_is_refused(self, tmp_path, tiny_config, views_dataset, fast_train_config):
        """Test qu'une reprise avec une configuration différente lève ConfigError."""
        val = TensorViewsDataset(n=6, seed=1)
        fit(build_model(tiny_config), views_dataset, val, fast_train_config, tmp_path)
        other = fast_train_config.model_copy(update={"learning_rate": 5e-4})
        with pytest.raises(ConfigError):
            fit(build_model(tiny_config), views_dataset, val, other, tmp_path, resume=True)

    def test_nan_input_reports_batch_and_epoch(self, tmp_path, tiny_config):
        """Test qu'un NaN dans le premier lot lève NumericFaultError (batch 0, epoch 1)."""
        config = TrainConfig(epochs=1, batch_size=64)
        with pytest.raises(NumericFaultError) as excinfo:
            fit(build_model(tiny_config), TensorViewsDataset(nan_index=0), TensorViewsDataset(n=6), config, tmp_path)
        assert excinfo.value.batch_index == 0
        assert excinfo.value.epoch == 1

    def test_warmup_requires_view_heads(self, tmp_path, tiny_config, views_dataset):
        """Test que le pré-chauffage sans têtes par vue est refusé."""
        config = TrainConfig(epochs=2, warmup_epochs=1, batch_size=4)
        with pytest.raises(ConfigError):
            fit(build_model(tiny_config), views_dataset, views_dataset, config, tmp_path)

    def test_warmup_phases(self, tmp_path, views_dataset):
        """Test qu'un epoch de pré-chauffage précède l'entraînement conjoint."""
        model = build_model(tiny_model_config(per_view_heads=True))
        config = TrainConfig(epochs=3, warmup_epochs=1, learning_rate=1e-3, batch_size=4)
        result = fit(model, views_dataset, TensorViewsDataset(n=6, seed=1), config, tmp_path)
        records = result.run_log.records
        assert [r.phase for r in records] == ["warmup", "joint", "joint"]
        assert not records[0].is_best
        assert result.run_log.best_epoch in (2, 3)

    def test_early_stopping(self, tmp_path, tiny_config, views_dataset):
        """Test l'arrêt anticipé quand le F1 de validation stagne."""
        config = TrainConfig(epochs=10, learning_rate=0.0, batch_size=4, early_stopping_patience=1)
        result = fit(build_model(tiny_config), views_dataset, TensorViewsDataset(n=6, seed=1), config, tmp_path)
        assert result.stopped_early
        assert len(result.run_log.records) < 10
        assert not result.run_log.records[-1].is_best


class TestRunLog:
    """Tests du journal d'exécution."""

    def test_out_of_sequence_epoch(self):
        """Test qu'un epoch hors séquence est refusé."""
        log = RunLog(config_hash="abc")
        log.append(epoch_record(1))
        with pytest.raises(ValueError):
            log.append(epoch_record(3))

    def test_round_trip_and_best(self, tmp_path):
        """Test écriture/relecture et suivi du meilleur epoch."""
        log = RunLog(config_hash="abc", seed=4)
        log.append(epoch_record(1, 0.4, is_best=True))
        log.append(epoch_record(2, 0.6, is_best=True))
        log.append(epoch_record(3, 0.5))
        path = log.write(tmp_path / "run_log.jsonl")
        again = RunLog.read(path)
        assert again.best_epoch == 2 and again.best_f1 == 0.6
        assert again.numeric_view() == log.numeric_view()
        again.truncate(1)
        assert again.best_epoch == 1


@pytest.mark.slow
def test_single_batch_overfit_canary():
    """Test le canari : 100 pas sur un lot de 8 ramènent la perte sous 0,05 (lr 1e-4)."""
    config = tiny_model_config(
        view_backbone=BackboneSpec(feature_dim=64),
        pose_backbone=BackboneSpec(feature_dim=64),
        fusion=FusionConfig(),
    )
    model = build_model(config).train()
    dataset = TensorViewsDataset(n=8)
    batch = next(iter(make_loader(dataset, 8, seed=0, shuffle=False)))
    optimizer = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=1e-4)
    losses = []
    for _ in range(100):
        loss = bce_loss(model(batch["views"]).prob, batch["label"])
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss))
    assert min(losses) < 0.05


class TestPosePretraining:
    """Tests du pré-entraînement de l'encodeur de pose."""

    def test_missing_classes(self):
        """Test qu'un jeu sans la classe 12 est refusé."""
        with pytest.raises(MissingPoseClassesError) as excinfo:
            pretrain_pose(PoseEncoder(BackboneSpec()), TensorPoseDataset(classes=range(12)), TrainConfig())
        assert excinfo.value.missing == [12]

    def test_loss_decreases(self):
        """Test que quelques epochs font baisser la perte."""
        torch.manual_seed(0)
        encoder = PoseEncoder(BackboneSpec())
        config = TrainConfig(pose_epochs=3, pose_batch_size=32)
        report = pretrain_pose(encoder, TensorPoseDataset(per_class=2), config)
        assert len(report.epochs) == 3
        assert report.epochs[-1].loss < report.initial_loss

    def test_checksum_is_deterministic(self):
        """Test que deux pré-entraînements identiques donnent la même empreinte."""
        checksums = []
        for _ in range(2):
            torch.manual_seed(0)
            encoder = PoseEncoder(BackboneSpec())
            report = pretrain_pose(encoder, TensorPoseDataset(per_class=1), TrainConfig(pose_epochs=2))
            checksums.append(report.checksum)
        assert checksums[0] == checksums[1]

    @pytest.mark.slow
    def test_reaches_high_accuracy(self):
        """Test ≥ 95 % de précision d'entraînement en 30 epochs (famille tiny-test)."""
        torch.manual_seed(0)
        encoder = PoseEncoder(BackboneSpec(feature_dim=64))
        config = TrainConfig(pose_epochs=30, pose_batch_size=32)
        report = pretrain_pose(encoder, TensorPoseDataset(per_class=8), config)
        assert report.final_accuracy >= 0.95
