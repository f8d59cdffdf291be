# Copyright 2025 Multiview DeepFake

"""Datasets PyTorch : vues pré-calculées sur disque ou extraites à la volée."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from ..config import ALL_VIEWS, GeometryConfig, Split, ViewName
from ..errors import InsufficientDataError
from ..vision.detection import FaceRecord
from ..vision.image import ImageBuffer, load_image
from ..vision.preprocess import ViewIndex
from ..vision.views import ViewTriple, extract_views
from .manifest import DatasetManifest, resolve_image_path

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)
NO_POSE = -1


def to_tensor(image: ImageBuffer | np.ndarray) -> torch.Tensor:
    """uint8 (H, W, 3) → float32 (3, H, W), mis à l'échelle [0, 1] puis normalisé ImageNet."""
    pixels = image.pixels if isinstance(image, ImageBuffer) else image
    scaled = (pixels.astype(np.float32) / 255.0 - IMAGENET_MEAN) / IMAGENET_STD
    return torch.from_numpy(np.ascontiguousarray(scaled.transpose(2, 0, 1)))


def triples_to_batch(
    triples: Sequence[ViewTriple],
    views: Sequence[ViewName] = ALL_VIEWS,
) -> dict[str, torch.Tensor]:
    """Empile des `ViewTriple` en un lot ``{vue: (B, 3, side, side)}``."""
    return {
        view.value: torch.stack([to_tensor(t.view(view)) for t in triples]) for view in views
    }


@dataclass(frozen=True)
class FaceSample:
    """Un visage étiqueté, avec ses vues sur disque ou de quoi les recalculer."""

    label: int
    pose_class: int | None
    image_path: Path
    face: FaceRecord
    view_paths: Mapping[ViewName, Path] | None = None

    def load_views(self, geometry: GeometryConfig) -> dict[ViewName, ImageBuffer]:
        if self.view_paths is not None:
            return {view: load_image(path) for view, path in self.view_paths.items()}
        triple = extract_views(load_image(self.image_path), self.face, geometry)
        return {view: triple.view(view) for view in ALL_VIEWS}


def samples_from_index(
    index: ViewIndex, root: Path | str, split: Split | str | None = None
) -> list[FaceSample]:
    root = Path(root)
    records = index.records if split is None else index.split(split)
    return [
        FaceSample(
            label=int(r.label),
            pose_class=r.pose_class,
            image_path=Path(r.image_path),
            face=r.face,
            view_paths={view: root / rel for view, rel in r.views.items()},
        )
        for r in records
    ]


def samples_from_manifest(
    manifest: DatasetManifest, root: Path | str, split: Split | str | None = None
) -> list[FaceSample]:
    """Échantillons « à la volée » : un par visage annoté du manifeste."""
    entries = manifest.entries if split is None else manifest.split(split)
    return [
        FaceSample(
            label=int(e.label),
            pose_class=e.pose_class,
            image_path=resolve_image_path(e, root),
            face=face,
        )
        for e in entries
        for face in e.faces
    ]


class MultiviewDataset(Dataset):
    """Renvoie ``{"views": {vue: tenseur}, "label": float, "pose": long}``.

    `cache=True` garde les tenseurs en mémoire après le premier accès
    (utile pour les petits jeux synthétiques en mode à la volée).
    """

    def __init__(
        self,
        samples: Sequence[FaceSample],
        views: Sequence[ViewName] = ALL_VIEWS,
        geometry: GeometryConfig | None = None,
        cache: bool = False,
    ):
        if not samples:
            raise InsufficientDataError("Aucun échantillon pour ce dataset")
        self.samples = list(samples)
        self.views = [ViewName(v) for v in views]
        self.geometry = geometry or GeometryConfig()
        self.cache = cache
        self._cache: dict[int, dict[str, torch.Tensor]] = {}

    def __len__(self) -> int:
        return len(self.samples)

    def _views(self, index: int) -> dict[str, torch.Tensor]:
        if index in self._cache:
            return self._cache[index]
        images = self.samples[index].load_views(self.geometry)
        tensors = {view.value: to_tensor(images[view]) for view in self.views}
        if self.cache:
            self._cache[index] = tensors
        return tensors

    def __getitem__(self, index: int) -> dict:
        sample = self.samples[index]
        return {
            "views": self._views(index),
            "label": torch.tensor(float(sample.label), dtype=torch.float32),
            "pose": torch.tensor(
                NO_POSE if sample.pose_class is None else sample.pose_class, dtype=torch.long
            ),
        }

    @property
    def labels(self) -> list[int]:
        return [s.label for s in self.samples]


class PoseDataset(Dataset):
    """Vue médiane et classe de pose, pour le pré-entraînement de l'encodeur de pose."""

    def __init__(self, samples: Sequence[FaceSample], geometry: GeometryConfig | None = None):
        self.samples = [s for s in samples if s.pose_class is not None]
        if not self.samples:
            raise InsufficientDataError("Aucun échantillon annoté en pose")
        self.geometry = geometry or GeometryConfig()
        self._cache: dict[int, torch.Tensor] = {}

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def classes(self) -> set[int]:
        return {int(s.pose_class) for s in self.samples if s.pose_class is not None}

    def __getitem__(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        if index not in self._cache:
            images = self.samples[index].load_views(self.geometry)
            self._cache[index] = to_tensor(images[ViewName.MIDDLE])
        pose = self.samples[index].pose_class
        return self._cache[index], torch.tensor(pose, dtype=torch.long)


def dataset_for_split(
    source: ViewIndex | DatasetManifest,
    root: Path | str,
    split: Split | str,
    views: Sequence[ViewName] = ALL_VIEWS,
    geometry: GeometryConfig | None = None,
    cache: bool = True,
) -> MultiviewDataset:
    """Dataset d'un split, depuis l'index de vues pré-calculées ou le manifeste (à la volée)."""
    if isinstance(source, ViewIndex):
        samples = samples_from_index(source, root, split)
        return MultiviewDataset(samples, views=views, geometry=geometry or source.geometry, cache=cache)
    samples = samples_from_manifest(source, root, split)
    return MultiviewDataset(samples, views=views, geometry=geometry, cache=cache)
