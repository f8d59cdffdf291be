# Copyright 2025 Multiview DeepFake

"""Graines, chargeurs de données et périphérique."""

from __future__ import annotations

import random

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def resolve_device(name: str) -> torch.device:
    if name.startswith("cuda") and not torch.cuda.is_available():
        return torch.device("cpu")
    return torch.device(name)


def make_loader(
    dataset: Dataset,
    batch_size: int,
    seed: int,
    shuffle: bool = True,
    num_workers: int = 0,
    batch_norm: bool = True,
) -> DataLoader:
    """DataLoader déterministe (générateur graine) ; évite un dernier lot de taille 1 en batch-norm."""
    generator = torch.Generator()
    generator.manual_seed(seed)
    drop_last = batch_norm and shuffle and len(dataset) % batch_size == 1 and len(dataset) > 1
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        num_workers=num_workers,
        generator=generator,
        drop_last=drop_last,
    )
