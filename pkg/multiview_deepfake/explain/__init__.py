# Copyright 2025 Multiview DeepFake

"""Explicabilité : cartes Grad-CAM, superpositions et panneaux comparatifs."""

from .gradcam import (
    Heatmap,
    colorize,
    gradcam,
    gradcam_from_tensors,
    heatmap_mass_ratio,
    hull_mass_ratio,
    normalize_map,
    overlay,
    render_panel,
    save_panel,
    upsample,
    view_landmarks,
)

__all__ = [
    "Heatmap",
    "colorize",
    "gradcam",
    "gradcam_from_tensors",
    "heatmap_mass_ratio",
    "hull_mass_ratio",
    "normalize_map",
    "overlay",
    "render_panel",
    "save_panel",
    "upsample",
    "view_landmarks",
]
