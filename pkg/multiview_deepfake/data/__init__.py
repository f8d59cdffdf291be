# Copyright 2025 Multiview DeepFake

"""Ingestion : manifestes, découpes, extraction vidéo et jeu synthétique.

Les datasets PyTorch vivent dans `multiview_deepfake.data.datasets`.
"""

from .frames import extract_video_frames, sample_frames
from .manifest import DatasetManifest, ManifestEntry, read_manifest, write_manifest
from .splits import make_splits, split_sizes
from .synthetic import POSE_TABLE, generate_synthetic, inject_artifact, render_face

__all__ = [
    "POSE_TABLE",
    "DatasetManifest",
    "ManifestEntry",
    "extract_video_frames",
    "generate_synthetic",
    "inject_artifact",
    "make_splits",
    "read_manifest",
    "render_face",
    "sample_frames",
    "split_sizes",
    "write_manifest",
]
