# Copyright 2025 Multiview DeepFake

"""Métriques de classification binaire (classe positive = fake)."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import MetricError

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fp, self.tn, self.fn)


@dataclass(frozen=True)
class PRF1:
    precision: float
    recall: float
    f1: float
    # Vrai quand le dénominateur est nul (la valeur est alors 0 par convention).
    precision_undefined: bool = False
    recall_undefined: bool = False
    f1_undefined: bool = False

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.precision, self.recall, self.f1)


def _validate(probs: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"Longueurs différentes: {p.size} scores, {y.size} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("Les labels doivent valoir 0 ou 1")
    return p, y.astype(np.int64)


def confusion(
    probs: Sequence[float] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    threshold: float = DEFAULT_THRESHOLD,
) -> Confusion:
    """Décision « fake » si prob ≥ threshold."""
    p, y = _validate(probs, labels)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("Les probabilités doivent être dans [0, 1]")
    predicted = p >= threshold
    positive = y == 1
    return Confusion(
        tp=int(np.sum(predicted & positive)),
        fp=int(np.sum(predicted & ~positive)),
        tn=int(np.sum(~predicted & ~positive)),
        fn=int(np.sum(~predicted & positive)),
    )


def prf1(counts: Confusion | tuple[int, int, int, int]) -> PRF1:
    tp, fp, _, fn = counts.as_tuple() if isinstance(counts, Confusion) else counts
    precision_undefined = tp + fp == 0
    recall_undefined = tp + fn == 0
    precision = 0.0 if precision_undefined else tp / (tp + fp)
    recall = 0.0 if recall_undefined else tp / (tp + fn)
    f1_undefined = precision + recall == 0
    f1 = 0.0 if f1_undefined else 2 * precision * recall / (precision + recall)
    return PRF1(precision, recall, f1, precision_undefined, recall_undefined, f1_undefined)


def auc(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    """Aire sous la courbe ROC, forme de Mann-Whitney (égalités comptées ½).

    Rangs moyens sur les égalités : U = Σ rangs(positifs) − n₊(n₊+1)/2.
    """
    s, y = _validate(scores, labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC indéfinie : les deux classes doivent être présentes")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    mean_rank = upper - (counts - 1) / 2.0
    ranks = mean_rank[inverse]
    u = float(np.sum(ranks[y == 1])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def accuracy(probs: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> float:
    c = confusion(probs, labels, threshold)
    return (c.tp + c.tn) / c.total if c.total else 0.0


def specificity(counts: Confusion) -> float:
    denom = counts.tn + counts.fp
    return counts.tn / denom if denom else 0.0
