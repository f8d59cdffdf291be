# Copyright 2025 Multiview DeepFake

"""Détecteur à quatre encodeurs et tête de fusion en deux étages."""

from .backbones import Backbone, TinyConvBackbone, build_backbone
from .checkpoint import (
    checkpoint_geometry,
    load_checkpoint,
    load_pose_weights,
    parameter_checksum,
    read_checkpoint,
    save_checkpoint,
    save_pose_checkpoint,
)
from .detector import (
    DetectorModel,
    DetectorOutput,
    build_model,
    forward,
    parameter_count,
    pose_class_from_logits,
    predict_pose,
)
from .encoders import PoseEncoder, ViewEncoder
from .fusion import FusionHead, fuse

__all__ = [
    "Backbone",
    "DetectorModel",
    "DetectorOutput",
    "FusionHead",
    "PoseEncoder",
    "TinyConvBackbone",
    "ViewEncoder",
    "build_backbone",
    "build_model",
    "checkpoint_geometry",
    "forward",
    "fuse",
    "load_checkpoint",
    "load_pose_weights",
    "parameter_checksum",
    "parameter_count",
    "pose_class_from_logits",
    "predict_pose",
    "read_checkpoint",
    "save_checkpoint",
    "save_pose_checkpoint",
]
