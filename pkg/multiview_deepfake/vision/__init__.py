# Copyright 2025 Multiview DeepFake

"""Géométrie des vues : images, détection de visages, extraction des trois vues."""

from .detection import (
    FaceDetectorProvider,
    FaceRecord,
    SidecarFaceDetector,
    detect_faces,
    parse_sidecar,
    sidecar_path,
    write_sidecar,
)
from .geometry import BoundingBox, FaceLandmarks, Point2, convex_hull, global_region, hull_mask, local_region
from .image import ImageBuffer, load_image, save_image
from .views import PadMetadata, ViewTriple, crop, extract_views, resize_pad

__all__ = [
    "BoundingBox",
    "FaceDetectorProvider",
    "FaceLandmarks",
    "FaceRecord",
    "ImageBuffer",
    "PadMetadata",
    "Point2",
    "SidecarFaceDetector",
    "ViewTriple",
    "convex_hull",
    "crop",
    "detect_faces",
    "extract_views",
    "global_region",
    "hull_mask",
    "load_image",
    "local_region",
    "parse_sidecar",
    "resize_pad",
    "save_image",
    "sidecar_path",
    "write_sidecar",
]
