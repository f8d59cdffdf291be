# Copyright 2025 Multiview DeepFake

"""Jeu de données synthétique de bureau : visages procéduraux réels / truqués.

Chaque item ``i`` produit une paire ``real_i`` / ``fake_i`` partageant le même
visage de base (même graine, même pose) ; le « fake » ne diffère que par un
artefact injecté dans l'enveloppe convexe des cinq repères, c'est-à-dire
dans la région centrale du visage.

Arborescence produite::

    out_dir/
      manifest.jsonl
      images/real_0000.png
      images/real_0000.faces.jsonl
      images/fake_0000.png
      ...
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from ..config import POSE_CLASS_COUNT, ArtifactKind, Label, SyntheticSpec, config_hash
from ..observability import get_logger
from ..vision.detection import FaceRecord, write_sidecar
from ..vision.geometry import BoundingBox, FaceLandmarks, hull_mask
from ..vision.image import ImageBuffer, save_image
from .manifest import DatasetManifest, ManifestEntry, write_manifest
from .splits import make_splits

logger = get_logger(__name__)

# (lacet, tangage) en degrés pour chacune des 13 classes de pose.
POSE_TABLE: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (-20.0, 0.0),
    (20.0, 0.0),
    (-40.0, 0.0),
    (40.0, 0.0),
    (-60.0, 0.0),
    (60.0, 0.0),
    (0.0, -20.0),
    (0.0, 20.0),
    (-30.0, -20.0),
    (30.0, -20.0),
    (-30.0, 20.0),
    (30.0, 20.0),
)

IMAGES_DIR = "images"
MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class SyntheticFace:
    image: ImageBuffer
    face: FaceRecord
    pose_class: int


def pose_quotas(count: int, distribution: list[float]) -> list[int]:
    """Répartit `count` items sur les classes (méthode du plus fort reste)."""
    raw = [count * p for p in distribution]
    quotas = [math.floor(r) for r in raw]
    remainders = sorted(range(len(raw)), key=lambda i: (-(raw[i] - quotas[i]), i))
    for i in remainders[: count - sum(quotas)]:
        quotas[i] += 1
    return quotas


def pose_schedule(spec: SyntheticSpec) -> list[int]:
    """Classe de pose de chaque item, mélangée de façon déterministe."""
    quotas = pose_quotas(spec.count, spec.pose_distribution)
    classes = np.repeat(np.arange(POSE_CLASS_COUNT), quotas)
    rng = np.random.default_rng([spec.seed, 0xF0CE])
    return [int(c) for c in rng.permutation(classes)]


def _landmarks_for_pose(
    cx: float, cy: float, a: float, b: float, yaw: float, pitch: float
) -> np.ndarray:
    """Repères d'un gabarit de visage frontal déplacés selon la pose."""
    dx = 0.35 * a * math.sin(math.radians(yaw))
    dy = 0.35 * b * math.sin(math.radians(pitch))
    squeeze = math.cos(math.radians(yaw))
    template = np.array(
        [
            [-0.40, -0.22],  # œil gauche
            [0.40, -0.22],  # œil droit
            [0.00, 0.10],  # nez
            [-0.30, 0.42],  # coin gauche de la bouche
            [0.30, 0.42],  # coin droit de la bouche
        ]
    )
    xs = cx + dx + template[:, 0] * a * squeeze
    ys = cy + dy + template[:, 1] * b
    return np.stack([xs, ys], axis=1)


def render_face(side: int, pose_class: int, rng: np.random.Generator) -> tuple[np.ndarray, FaceRecord]:
    """Dessine un visage elliptique sur fond bruité ; renvoie pixels RGB et annotation."""
    base = rng.integers(40, 200, size=3)
    noise = rng.normal(0.0, 12.0, size=(side, side, 3))
    background = cv2.GaussianBlur(noise, (0, 0), sigmaX=2.0) + base
    pixels = np.clip(background, 0, 255).astype(np.uint8)

    a = side * 0.28 * rng.uniform(0.95, 1.05)
    b = side * 0.36 * rng.uniform(0.95, 1.05)
    cx = side / 2 + rng.uniform(-4.0, 4.0)
    cy = side / 2 + rng.uniform(-4.0, 4.0)
    skin = (int(rng.integers(150, 235)), int(rng.integers(110, 190)), int(rng.integers(80, 160)))
    cv2.ellipse(pixels, (round(cx), round(cy)), (round(a), round(b)), 0, 0, 360, skin, -1, cv2.LINE_AA)

    yaw, pitch = POSE_TABLE[pose_class]
    points = _landmarks_for_pose(cx, cy, a, b, yaw, pitch)
    feature = (40, 30, 30)
    eye_r = max(2, round(side * 0.025))
    for x, y in points[:2]:
        cv2.circle(pixels, (round(x), round(y)), eye_r, feature, -1, cv2.LINE_AA)
    nx, ny = points[2]
    cv2.circle(pixels, (round(nx), round(ny)), max(1, eye_r - 1), (120, 70, 60), -1, cv2.LINE_AA)
    (mlx, mly), (mrx, mry) = points[3], points[4]
    cv2.line(pixels, (round(mlx), round(mly)), (round(mrx), round(mry)), (150, 40, 50), 2, cv2.LINE_AA)

    box = BoundingBox(
        x0=max(0.0, cx - a), y0=max(0.0, cy - b), x1=min(float(side), cx + a), y1=min(float(side), cy + b)
    )
    face = FaceRecord(box=box, landmarks=FaceLandmarks.from_array(points))
    return pixels, face


def artifact_mask(face: FaceRecord, shape: tuple[int, int]) -> np.ndarray:
    return hull_mask(face.landmarks, shape, margin=0.0)


def inject_artifact(
    pixels: np.ndarray,
    face: FaceRecord,
    kind: ArtifactKind,
    rng: np.random.Generator,
) -> np.ndarray:
    """Applique l'artefact `kind` à l'intérieur de l'enveloppe des repères."""
    mask = artifact_mask(face, pixels.shape[:2])
    out = pixels.astype(np.float64)
    if kind is ArtifactKind.CENTRAL_BLEND_SEAM:
        tint = rng.uniform(18.0, 30.0, size=3) * rng.choice([-1.0, 1.0], size=3)
        out[mask] += tint
        inner = cv2.erode(mask.astype(np.uint8), np.ones((3, 3), np.uint8), iterations=2).astype(bool)
        seam = mask & ~inner
        out[seam] = out[seam] * 0.5 + 0.5 * (255.0 if out[seam].mean() < 128 else 0.0)
    elif kind is ArtifactKind.PATCH_NOISE:
        out[mask] += rng.normal(0.0, 20.0, size=(int(mask.sum()), 3))
    else:
        region = out[mask]
        out[mask] = region[:, ::-1] * 0.8 + rng.uniform(10.0, 30.0, size=3)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def synthesize_pair(spec: SyntheticSpec, index: int, pose_class: int) -> dict[Label, SyntheticFace]:
    """Item `index` : visage réel et son homologue truqué (déterministe)."""
    base_rng = np.random.default_rng([spec.seed, index])
    pixels, face = render_face(spec.image_side, pose_class, base_rng)
    artifact_rng = np.random.default_rng([spec.seed, index, 1])
    fake = inject_artifact(pixels, face, spec.artifact_kind, artifact_rng)
    return {
        Label.REAL: SyntheticFace(ImageBuffer(pixels), face, pose_class),
        Label.FAKE: SyntheticFace(ImageBuffer(fake), face, pose_class),
    }


def _write_item(
    spec: SyntheticSpec, index: int, pose_class: int, images_dir: Path
) -> list[ManifestEntry]:
    entries = []
    for label, item in synthesize_pair(spec, index, pose_class).items():
        stem = f"{label.name.lower()}_{index:04d}"
        image_path = save_image(item.image, images_dir / f"{stem}.png")
        face = item.face.model_copy(update={"source_image": image_path.name})
        write_sidecar(images_dir / f"{stem}.faces.jsonl", [face])
        entries.append(
            ManifestEntry(
                image_path=f"{IMAGES_DIR}/{stem}.png",
                label=label,
                faces=[face],
                source_unit=stem,
                pose_class=pose_class,
            )
        )
    return entries


def generate_synthetic(
    spec: SyntheticSpec,
    out_dir: Path | str,
    workers: int = 1,
) -> DatasetManifest:
    """Génère ``2 × count`` images annotées, découpées 70/15/15, et leur manifeste."""
    out_dir = Path(out_dir)
    images_dir = out_dir / IMAGES_DIR
    try:
        images_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Impossible de créer le dossier {images_dir}: {exc}") from exc

    schedule = pose_schedule(spec)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(
                pool.map(lambda i: _write_item(spec, i, schedule[i], images_dir), range(spec.count))
            )
    else:
        chunks = [_write_item(spec, i, schedule[i], images_dir) for i in range(spec.count)]
    entries = [entry for chunk in chunks for entry in chunk]

    source = f"synthetic:{spec.artifact_kind.value}:{config_hash(spec)[:12]}"
    manifest = make_splits(entries, seed=spec.seed, source=source)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info(
        "Jeu synthétique généré",
        extra={"context": {"out_dir": str(out_dir), "images": len(entries), "seed": spec.seed}},
    )
    return manifest
