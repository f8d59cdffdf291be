# Copyright 2025 Multiview DeepFake

"""Découpe stratifiée et déterministe 70 / 15 / 15.

La découpe se fait par unité source (vidéo ou item synthétique) pour éviter
toute fuite entre splits. Les effectifs par label sont obtenus par arrondi
cumulé : les bornes ``round(0.70·C)`` et ``round(0.85·C)`` sont calculées sur
les effectifs cumulés des labels, ce qui garde chaque label à ±1 de la cible
et rend les totaux exacts quand les labels sont équilibrés.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Sequence

import numpy as np

from ..config import Label, Split
from ..errors import InsufficientDataError
from ..observability import get_logger
from .manifest import DatasetManifest, ManifestEntry

logger = get_logger(__name__)

TRAIN_FRACTION = 0.70
VAL_FRACTION = 0.15
MIN_PER_LABEL = 7


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5 + 1e-9)


def split_sizes(counts: Sequence[int]) -> list[tuple[int, int, int]]:
    """(train, val, test) par label, par arrondi des bornes cumulées."""
    sizes: list[tuple[int, int, int]] = []
    cumulative = 0
    prev_b1 = prev_b2 = 0
    for count in counts:
        cumulative += count
        b1 = _round_half_up(TRAIN_FRACTION * cumulative)
        b2 = _round_half_up((TRAIN_FRACTION + VAL_FRACTION) * cumulative)
        n_train = b1 - prev_b1
        n_val = b2 - b1 - (prev_b2 - prev_b1)
        sizes.append((n_train, n_val, count - n_train - n_val))
        prev_b1, prev_b2 = b1, b2
    return sizes


def make_splits(
    entries: Sequence[ManifestEntry],
    seed: int,
    source: str = "",
) -> DatasetManifest:
    """Assigne train/val/test par label, au niveau des unités source."""
    # Unités distinctes par label, dans un ordre stable avant mélange.
    units_by_label: dict[Label, set[str]] = defaultdict(set)
    for entry in entries:
        units_by_label[Label(entry.label)].add(entry.unit)
    units_per_label = {label: sorted(units_by_label[label]) for label in Label}
    for label, units in units_per_label.items():
        # Minimum compté en unités source.
        if len(units) < MIN_PER_LABEL:
            raise InsufficientDataError(
                f"Au moins {MIN_PER_LABEL} unités source par label requises, "
                f"{len(units)} pour le label {label.name.lower()}"
            )

    rng = np.random.default_rng(seed)
    assignment: dict[str, Split] = {}

    item_counts = [len(units_per_label[label]) for label in Label]
    for label, (n_train, n_val, _) in zip(Label, split_sizes(item_counts)):
        units = units_per_label[label]
        order = rng.permutation(len(units))
        for rank, index in enumerate(order):
            unit = units[int(index)]
            if rank < n_train:
                split = Split.TRAIN
            elif rank < n_train + n_val:
                split = Split.VAL
            else:
                split = Split.TEST
            assignment[f"{label.value}:{unit}"] = split

    assigned = [
        entry.model_copy(update={"split": assignment[f"{int(entry.label)}:{entry.unit}"]})
        for entry in entries
    ]
    manifest = DatasetManifest(seed=seed, source=source, entries=assigned)
    logger.info(
        "Découpe stratifiée terminée",
        extra={"context": {"seed": seed, "counts": manifest.split_counts()}},
    )
    return manifest
