# Copyright 2025 Multiview DeepFake

"""Grad-CAM sur une couche spatiale d'un encodeur de vue.

    poids_c = moyenne spatiale de ∂logit_fake / ∂A_c
    carte   = ReLU(Σ_c poids_c · A_c), normalisée dans [0, 1]

Pour la famille transformer, les tokens (hors token de classe) sont remis
sur leur grille de patchs avant le calcul.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
import torch
from PIL import Image

from ..config import ViewName
from ..data.datasets import triples_to_batch
from ..errors import UnsupportedLayerError
from ..model.detector import DetectorModel
from ..vision.detection import FaceRecord
from ..vision.geometry import FaceLandmarks, hull_mask
from ..vision.image import ImageBuffer
from ..vision.views import PadMetadata, ViewTriple


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Carte normalisée sur la grille de la couche (avant suréchantillonnage)."""

    values: np.ndarray
    view: ViewName
    layer: str
    target: str = "fake"
    degenerate: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]))


def normalize_map(cam: np.ndarray) -> tuple[np.ndarray, bool]:
    """Min-max dans [0, 1] ; une carte constante ou non finie devient nulle (dégénérée)."""
    cam = np.asarray(cam, dtype=np.float64)
    if not np.all(np.isfinite(cam)):
        return np.zeros_like(cam), True
    lo, hi = float(cam.min()), float(cam.max())
    if hi - lo <= 0.0:
        return np.zeros_like(cam), True
    return (cam - lo) / (hi - lo), False


def gradcam_from_tensors(
    activations: torch.Tensor | np.ndarray,
    gradients: torch.Tensor | np.ndarray,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """(carte normalisée, carte rectifiée brute, dégénérée) pour des tenseurs (C, h, w)."""
    a = torch.as_tensor(activations, dtype=torch.float64)
    g = torch.as_tensor(gradients, dtype=torch.float64)
    if a.ndim == 4:
        a, g = a[0], g[0]
    if a.ndim != 3 or a.shape != g.shape:
        raise UnsupportedLayerError(f"Activations (C, h, w) attendues, reçu {tuple(a.shape)}")
    weights = g.mean(dim=(1, 2))
    raw = torch.relu((weights[:, None, None] * a).sum(dim=0)).numpy()
    values, degenerate = normalize_map(raw)
    return values, raw, degenerate


def _to_grid(tensor: torch.Tensor, token_grid: tuple[int, int] | None, layer: str) -> torch.Tensor:
    """Ramène la sortie de couche à (C, h, w) pour le premier échantillon."""
    if tensor.ndim == 4:
        return tensor[0]
    if tensor.ndim == 3 and token_grid is not None:
        gh, gw = token_grid
        tokens = tensor[0]
        # Tokens de tête (classe) écartés : on garde les gh·gw derniers.
        patches = tokens[tokens.shape[0] - gh * gw :]
        return patches.reshape(gh, gw, -1).permute(2, 0, 1)
    raise UnsupportedLayerError(
        f"La couche « {layer} » n'a pas de grille spatiale (sortie {tuple(tensor.shape)})"
    )


def gradcam(
    model: DetectorModel,
    views: ViewTriple | Mapping[str, torch.Tensor],
    view: ViewName | str,
    layer: str | None = None,
) -> Heatmap:
    """Grad-CAM du logit « fake » pour l'encodeur `view` (un seul échantillon)."""
    view = ViewName(view)
    if view.value not in model.encoders:
        raise UnsupportedLayerError(f"Le modèle n'a pas d'encodeur pour la vue {view.value}")
    backbone = model.encoders[view.value].backbone
    layer = layer or backbone.gradcam_layer
    modules = dict(backbone.named_modules())
    if layer not in modules:
        raise UnsupportedLayerError(f"Couche inconnue pour l'encodeur {view.value}: {layer}")

    if isinstance(views, ViewTriple):
        views = triples_to_batch([views], model.required_views)
    device = next(model.parameters()).device
    batch = {name: t[:1].to(device).clone().requires_grad_(True) for name, t in views.items()}

    captured: dict[str, torch.Tensor] = {}

    def _hook(_module, _inputs, output):
        output.retain_grad()
        captured["activation"] = output

    handle = modules[layer].register_forward_hook(_hook)
    was_training = model.training
    model.eval()
    try:
        with torch.enable_grad():
            out = model(batch)
            model.zero_grad(set_to_none=True)
            out.logit[0].backward()
    finally:
        handle.remove()
        model.train(was_training)

    activation = captured["activation"]
    if activation.grad is None:
        raise UnsupportedLayerError(f"Aucun gradient n'atteint la couche « {layer} »")
    a = _to_grid(activation.detach(), backbone.token_grid, layer)
    g = _to_grid(activation.grad.detach(), backbone.token_grid, layer)
    values, _, degenerate = gradcam_from_tensors(a, g)
    return Heatmap(values=values, view=view, layer=layer, degenerate=degenerate)


def upsample(heatmap: Heatmap | np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Suréchantillonnage bilinéaire vers (hauteur, largeur), borné à [0, 1]."""
    values = heatmap.values if isinstance(heatmap, Heatmap) else np.asarray(heatmap)
    height, width = size
    if values.shape == (height, width):
        return values.astype(np.float64)
    resized = cv2.resize(values.astype(np.float32), (width, height), interpolation=cv2.INTER_LINEAR)
    return np.clip(resized.astype(np.float64), 0.0, 1.0)


def colorize(values: np.ndarray) -> np.ndarray:
    """Carte [0, 1] → RGB uint8 (palette JET)."""
    levels = np.rint(np.clip(values, 0.0, 1.0) * 255).astype(np.uint8)
    return cv2.cvtColor(cv2.applyColorMap(levels, cv2.COLORMAP_JET), cv2.COLOR_BGR2RGB)


def overlay(heatmap: Heatmap | np.ndarray, image: ImageBuffer, alpha: float = 0.5) -> ImageBuffer:
    """Composite (1−α)·image + α·palette(carte) ; l'image d'origine n'est pas modifiée."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha doit être dans [0, 1], reçu {alpha}")
    values = upsample(heatmap, (image.height, image.width))
    if values.shape != (image.height, image.width):
        raise ValueError(f"Carte {values.shape} incompatible avec l'image {image.height}x{image.width}")
    color = colorize(values).astype(np.float64)
    blended = (1.0 - alpha) * image.pixels.astype(np.float64) + alpha * color
    return ImageBuffer(np.clip(np.rint(blended), 0, 255).astype(np.uint8), source=image.source)


def view_landmarks(face: FaceRecord, pad: PadMetadata) -> FaceLandmarks:
    """Repères du visage exprimés dans les coordonnées d'une vue."""
    points = [pad.to_view(x, y) for x, y in face.landmarks.to_list()]
    return FaceLandmarks.from_array(points)


def heatmap_mass_ratio(heatmap: Heatmap | np.ndarray, mask: np.ndarray) -> float:
    """Part de la masse de la carte (à la taille du masque) située dans `mask`."""
    values = upsample(heatmap, mask.shape)
    total = float(values.sum())
    if total <= 0.0:
        return 0.0
    return float(values[mask.astype(bool)].sum()) / total


def hull_mass_ratio(heatmap: Heatmap, face: FaceRecord, pad: PadMetadata, margin: float = 0.0) -> float:
    """Masse de la carte dans l'enveloppe des repères, dans le repère de la vue."""
    mask = hull_mask(view_landmarks(face, pad), (pad.side, pad.side), margin=margin)
    return heatmap_mass_ratio(heatmap, mask)


def render_panel(original: ImageBuffer, overlays: Sequence[ImageBuffer], gap: int = 4) -> ImageBuffer:
    """Panneau horizontal : original | superposition 1 | superposition 2 | …"""
    tiles = [original, *overlays]
    height = max(t.height for t in tiles)
    parts: list[np.ndarray] = []
    for index, tile in enumerate(tiles):
        column = np.zeros((height, tile.width, 3), dtype=np.uint8)
        column[: tile.height] = tile.pixels
        if index:
            parts.append(np.full((height, gap, 3), 255, dtype=np.uint8))
        parts.append(column)
    return ImageBuffer(np.concatenate(parts, axis=1))


def save_panel(panel: ImageBuffer, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.stem}.tmp.png")
    Image.fromarray(panel.pixels).save(tmp, format="PNG")
    tmp.replace(path)
    return path
