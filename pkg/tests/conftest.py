# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Fixtures partagées : petits modèles tiny-test, datasets en mémoire, jeu synthétique."""

import os

import numpy as np
import pytest
import torch
from torch.utils.data import Dataset

# Aucun appel réseau pendant les tests
os.environ.pop("LANGFUSE_PUBLIC_KEY", None)
os.environ.pop("LANGFUSE_SECRET_KEY", None)
os.environ.pop("MVDF_CONFIG", None)

from multiview_deepfake.config import (
    ALL_VIEWS,
    BackboneFamily,
    BackboneSpec,
    FusionConfig,
    GeometryConfig,
    ModelConfig,
    SyntheticSpec,
    TrainConfig,
)
from multiview_deepfake.data.synthetic import generate_synthetic
from multiview_deepfake.vision.detection import FaceRecord
from multiview_deepfake.vision.geometry import BoundingBox, FaceLandmarks

SMALL_SIDE = 32


class TensorViewsDataset(Dataset):
    """Lots de vues aléatoires (graine fixe), labels alternés ; `nan_index` injecte un NaN."""

    def __init__(self, n: int = 12, side: int = SMALL_SIDE, seed: int = 0, nan_index: int | None = None):
        generator = torch.Generator().manual_seed(seed)
        self.labels = [i % 2 for i in range(n)]
        self.views = {
            view.value: torch.randn(n, 3, side, side, generator=generator) for view in ALL_VIEWS
        }
        # Les « fake » portent un décalage visible sur la vue locale.
        for i, label in enumerate(self.labels):
            if label:
                self.views["local"][i] += 1.5
        if nan_index is not None:
            self.views["global"][nan_index, 0, 0, 0] = float("nan")
        self.poses = [i % 13 for i in range(n)]

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int) -> dict:
        return {
            "views": {name: t[index] for name, t in self.views.items()},
            "label": torch.tensor(float(self.labels[index])),
            "pose": torch.tensor(self.poses[index]),
        }


class TensorPoseDataset(Dataset):
    """Images (3, side, side) dont la classe de pose est codée par la position d'un carré."""

    def __init__(self, per_class: int = 1, side: int = SMALL_SIDE, seed: int = 0, classes=range(13)):
        generator = torch.Generator().manual_seed(seed)
        images, poses = [], []
        for pose in classes:
            for _ in range(per_class):
                image = 0.1 * torch.randn(3, side, side, generator=generator)
                row, col = divmod(pose, 4)
                cell = side // 4
                image[:, row * cell : (row + 1) * cell, col * cell : (col + 1) * cell] += 2.0
                images.append(image)
                poses.append(pose)
        self.images = torch.stack(images)
        self.poses = torch.tensor(poses)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def classes(self) -> set[int]:
        return {int(p) for p in self.poses}

    def __getitem__(self, index: int):
        return self.images[index], self.poses[index]


def tiny_model_config(**overrides) -> ModelConfig:
    params = {
        "view_backbone": BackboneSpec(family=BackboneFamily.TINY_TEST, feature_dim=16),
        "pose_backbone": BackboneSpec(family=BackboneFamily.TINY_TEST, feature_dim=16),
        "fusion": FusionConfig(hidden_dim=32, fused_dim=16, pose_hidden_dim=8),
        "seed": 0,
    }
    params.update(overrides)
    return ModelConfig(**params)


def make_face(box=(100.0, 100.0, 200.0, 220.0), landmarks=None) -> FaceRecord:
    x0, y0, x1, y1 = box
    if landmarks is None:
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        w, h = x1 - x0, y1 - y0
        landmarks = [
            [cx - 0.2 * w, cy - 0.15 * h],
            [cx + 0.2 * w, cy - 0.15 * h],
            [cx, cy + 0.05 * h],
            [cx - 0.15 * w, cy + 0.25 * h],
            [cx + 0.15 * w, cy + 0.25 * h],
        ]
    return FaceRecord(box=BoundingBox.from_list(box), landmarks=FaceLandmarks.from_array(landmarks))


@pytest.fixture
def tiny_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def small_geometry() -> GeometryConfig:
    return GeometryConfig(side=SMALL_SIDE)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(epochs=2, learning_rate=1e-3, batch_size=4, seed=0)


@pytest.fixture
def views_dataset() -> TensorViewsDataset:
    return TensorViewsDataset(n=12)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_set(tmp_path_factory):
    """Petit jeu synthétique annoté (10 paires, images 96×96), partagé par la session."""
    out = tmp_path_factory.mktemp("synthetic")
    manifest = generate_synthetic(SyntheticSpec(count=10, image_side=96, seed=3), out)
    return manifest, out
