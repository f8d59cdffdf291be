# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Tests de la géométrie des vues : régions, rognage, redimensionnement, extraction."""

import cv2
import numpy as np
import pytest

from multiview_deepfake.config import GeometryConfig, ViewName
from multiview_deepfake.errors import DegenerateGeometryError, EmptyCropError, GeometryError
from multiview_deepfake.vision.geometry import (
    BoundingBox,
    FaceLandmarks,
    convex_hull,
    global_region,
    hull_mask,
    local_region,
)
from multiview_deepfake.vision.image import ImageBuffer
from multiview_deepfake.vision.views import crop, extract_views, resize_pad
from tests.conftest import make_face


def dilation_oracle(points: np.ndarray, margin: int, size: int) -> tuple[int, int, int, int]:
    """Boîte englobante (pixels) de l'enveloppe rastérisée puis dilatée par un disque."""
    canvas = np.zeros((size, size), dtype=np.uint8)
    hull = cv2.convexHull(points.astype(np.int32))
    if len(hull) >= 3:
        cv2.fillConvexPoly(canvas, hull, 1)
    else:
        (ax, ay), (bx, by) = hull[0][0], hull[-1][0]
        cv2.line(canvas, (int(ax), int(ay)), (int(bx), int(by)), 1, 1)
    kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * margin + 1, 2 * margin + 1))
    dilated = cv2.dilate(canvas, kernel)
    ys, xs = np.nonzero(dilated)
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def reference_bilinear(src: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Rééchantillonnage bilinéaire à centres de pixels, écrit indépendamment d'OpenCV."""
    h, w = src.shape[:2]
    x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[None, :, None]
    fy = (y - y0)[:, None, None]
    s = src.astype(np.float64)
    top = s[y0][:, x0] * (1 - fx) + s[y0][:, x1] * fx
    bottom = s[y1][:, x0] * (1 - fx) + s[y1][:, x1] * fx
    return np.rint(top * (1 - fy) + bottom * fy)


def gradient_image(width: int, height: int) -> ImageBuffer:
    xs = np.linspace(0, 255, width)[None, :].repeat(height, axis=0)
    ys = np.linspace(0, 255, height)[:, None].repeat(width, axis=1)
    pixels = np.stack([xs, ys, np.full_like(xs, 128.0)], axis=2)
    return ImageBuffer(np.rint(pixels).astype(np.uint8))


class TestLocalRegion:
    """Tests de la vue locale (enveloppe dilatée)."""

    def test_reference_landmarks(self):
        """Test l'exemple de référence : boîte (35, 35, 115, 115)."""
        landmarks = FaceLandmarks.from_array([[50, 50], [100, 50], [75, 75], [60, 100], [90, 100]])
        assert local_region(landmarks).to_list() == [35.0, 35.0, 115.0, 115.0]

    def test_collinear_landmarks(self):
        """Test une enveloppe dégénérée en segment."""
        landmarks = FaceLandmarks.from_array([[x, 40] for x in (10, 20, 30, 40, 50)])
        assert local_region(landmarks).to_list() == [-5.0, 25.0, 65.0, 55.0]

    def test_zero_margin(self):
        """Test qu'une marge nulle donne la boîte du carré."""
        landmarks = FaceLandmarks.from_array([[0, 0], [10, 0], [0, 10], [10, 10], [5, 5]])
        assert local_region(landmarks, margin=0).to_list() == [0.0, 0.0, 10.0, 10.0]

    def test_identical_landmarks_raise(self):
        """Test que cinq points confondus lèvent une erreur de géométrie dégénérée."""
        landmarks = FaceLandmarks.from_array([[20, 20]] * 5)
        with pytest.raises(DegenerateGeometryError):
            local_region(landmarks)

    def test_matches_dilation_oracle(self):
        """Test la loi boîte ± marge contre la dilatation pixel à pixel (100 tirages)."""
        rng = np.random.default_rng(7)
        for _ in range(100):
            points = rng.integers(40, 160, size=(5, 2))
            if len({tuple(p) for p in points}) < 2:
                continue
            box = local_region(FaceLandmarks.from_array(points), margin=15)
            assert tuple(int(v) for v in box.to_list()) == dilation_oracle(points, 15, 200)

    def test_translation_equivariance(self):
        """Test que translater les repères translate la région d'autant."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            points = rng.uniform(0, 100, size=(5, 2))
            dx, dy = rng.uniform(-50, 50, size=2)
            base = local_region(FaceLandmarks.from_array(points))
            moved = local_region(FaceLandmarks.from_array(points + [dx, dy]))
            expected = [base.x0 + dx, base.y0 + dy, base.x1 + dx, base.y1 + dy]
            assert moved.to_list() == pytest.approx(expected, abs=1e-9)

    def test_convex_hull_drops_interior_points(self):
        """Test que le centre d'un carré n'est pas un sommet de l'enveloppe."""
        hull = convex_hull([(0, 0), (10, 0), (0, 10), (10, 10), (5, 5)])
        assert sorted(hull) == [(0, 0), (0, 10), (10, 0), (10, 10)]

    def test_convex_hull_keeps_input_precision(self):
        """Test que les sommets sont les points d'origine, sans arrondi float32."""
        points = [(100.123456789, 50.000000001), (140.5, 52.25), (120.0, 90.987654321), (121.0, 60.0)]
        hull = convex_hull(points)
        assert sorted(hull) == sorted(points[:3])

    def test_convex_hull_collinear(self):
        """Test qu'un nuage colinéaire se réduit à ses deux extrémités."""
        assert convex_hull([(0.0, 0.0), (2.0, 1.0), (4.0, 2.0), (8.0, 4.0)]) == [(0.0, 0.0), (8.0, 4.0)]


class TestGlobalRegion:
    """Tests de la vue globale (élargissement + bornage)."""

    @pytest.mark.parametrize(
        "middle,expected",
        [
            ((100, 100, 200, 200), [80.0, 80.0, 220.0, 220.0]),
            ((5, 5, 50, 50), [0.0, 0.0, 70.0, 70.0]),
            ((460, 460, 500, 500), [440.0, 440.0, 500.0, 500.0]),
        ],
    )
    def test_expand_and_clip(self, middle, expected):
        """Test l'arithmétique d'élargissement et de bornage sur une image 500×500."""
        box = global_region(BoundingBox.from_list(middle), expand=20, image=(500, 500))
        assert box.to_list() == expected

    def test_monotone(self):
        """Test que la sortie contient l'entrée bornée et reste dans l'image."""
        rng = np.random.default_rng(3)
        for _ in range(50):
            x0, y0 = rng.uniform(0, 400, size=2)
            w, h = rng.uniform(5, 100, size=2)
            middle = BoundingBox(x0=x0, y0=y0, x1=x0 + w, y1=y0 + h)
            out = global_region(middle, image=(500, 500))
            assert out.contains_box(middle.clipped(500, 500))
            assert BoundingBox(x0=0, y0=0, x1=500, y1=500).contains_box(out)

    def test_box_outside_image_raises(self):
        """Test une boîte sans intersection avec l'image."""
        with pytest.raises(GeometryError):
            global_region(BoundingBox.from_list([900, 900, 950, 950]), image=(500, 500))


class TestCropAndResize:
    """Tests du rognage et du redimensionnement avec padding."""

    @pytest.fixture
    def image(self) -> ImageBuffer:
        rng = np.random.default_rng(0)
        return ImageBuffer(rng.integers(0, 256, size=(60, 80, 3), dtype=np.uint8))

    def test_full_image_crop_is_identity(self, image):
        """Test qu'une boîte couvrant l'image la recopie à l'identique."""
        out = crop(image, BoundingBox.from_list([0, 0, 80, 60]))
        assert out.same_pixels(image)

    def test_single_pixel_crop(self, image):
        """Test une boîte 1×1 en (3, 7)."""
        out = crop(image, BoundingBox.from_list([3, 7, 4, 8]))
        assert (out.width, out.height) == (1, 1)
        assert out.pixel(0, 0) == image.pixel(3, 7)

    def test_crop_is_clipped(self, image):
        """Test qu'une boîte débordant de l'image donne le coin 10×10."""
        out = crop(image, BoundingBox.from_list([-10, -10, 10, 10]))
        assert np.array_equal(out.pixels, image.pixels[:10, :10])

    def test_crop_outside_raises(self, image):
        """Test qu'une boîte hors image lève EmptyCropError."""
        with pytest.raises(EmptyCropError):
            crop(image, BoundingBox.from_list([200, 200, 300, 300]))

    def test_square_input_is_identity(self):
        """Test qu'une entrée 224×224 est recopiée bit à bit, échelle 1."""
        source = gradient_image(224, 224)
        out, meta = resize_pad(source, 224)
        assert out.same_pixels(source)
        assert meta.scale == 1.0
        assert (meta.pad_left, meta.pad_top, meta.pad_right, meta.pad_bottom) == (0, 0, 0, 0)

    def test_wide_input_is_padded_vertically(self):
        """Test 448×224 : contenu 224×112, 56 lignes nulles au-dessus et en dessous."""
        source = ImageBuffer(np.full((224, 448, 3), 200, dtype=np.uint8))
        out, meta = resize_pad(source, 224)
        assert (meta.content_width, meta.content_height) == (224, 112)
        assert (meta.pad_top, meta.pad_bottom) == (56, 56)
        assert not out.pixels[:56].any() and not out.pixels[168:].any()
        assert (out.pixels[56:168] == 200).all()

    def test_upscale_matches_reference_resampler(self):
        """Test 100×50 → 224×112 à ±1 niveau d'un rééchantillonneur de référence."""
        source = gradient_image(100, 50)
        out, meta = resize_pad(source, 224)
        assert meta.scale == pytest.approx(2.24)
        assert (meta.pad_top, meta.pad_bottom) == (56, 56)
        content = out.pixels[meta.content_slice()].astype(np.float64)
        reference = reference_bilinear(source.pixels, 224, 112)
        assert np.abs(content - reference).max() <= 1

    def test_pad_pixels_are_exactly_zero(self):
        """Test que toutes les zones de padding valent exactement 0."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            w, h = (int(v) for v in rng.integers(10, 300, size=2))
            source = ImageBuffer(np.full((h, w, 3), 255, dtype=np.uint8))
            out, meta = resize_pad(source, 224)
            mask = np.ones((224, 224), dtype=bool)
            mask[meta.content_slice()] = False
            assert not out.pixels[mask].any()
            assert (out.pixels[meta.content_slice()] == 255).all()

    def test_coordinate_inversion(self):
        """Test que to_source inverse to_view."""
        _, meta = resize_pad(gradient_image(100, 50), 224)
        meta = meta.model_copy(update={"origin_x": 30, "origin_y": 12})
        u, v = meta.to_view(57.5, 40.25)
        assert meta.to_source(u, v) == pytest.approx((57.5, 40.25))


class TestExtractViews:
    """Tests de la composition des trois vues."""

    @pytest.fixture
    def image(self) -> ImageBuffer:
        return gradient_image(400, 400)

    def test_three_views_of_side_224(self, image):
        """Test la taille des vues et l'emboîtement global ⊇ médiane ⊇ repères."""
        face = make_face()
        triple = extract_views(image, face)
        for view in ViewName:
            assert (triple.view(view).width, triple.view(view).height) == (224, 224)
        assert triple.regions[ViewName.GLOBAL].contains_box(triple.regions[ViewName.MIDDLE])
        for point in face.landmarks.points():
            assert face.box.contains_point(point.x, point.y)

    def test_face_at_border(self, image):
        """Test un visage collé au bord : vues toujours 224×224."""
        triple = extract_views(image, make_face(box=(0.0, 0.0, 80.0, 90.0)))
        assert all(triple.view(v).pixels.shape == (224, 224, 3) for v in ViewName)

    def test_deterministic(self, image):
        """Test que deux extractions identiques sont bit à bit égales."""
        face = make_face()
        assert extract_views(image, face).same_pixels(extract_views(image, face))

    def test_random_faces_keep_containment(self, image):
        """Test global ⊇ médiane sur 100 visages aléatoires."""
        rng = np.random.default_rng(9)
        geometry = GeometryConfig(side=32)
        for _ in range(100):
            x0, y0 = rng.uniform(0, 300, size=2)
            w, h = rng.uniform(30, 99, size=2)
            face = make_face(box=(x0, y0, x0 + w, y0 + h))
            triple = extract_views(image, face, geometry)
            assert triple.regions[ViewName.GLOBAL].contains_box(triple.regions[ViewName.MIDDLE])


class TestHullMask:
    """Tests du masque d'enveloppe."""

    def test_margin_dilates(self):
        """Test que la dilatation agrandit le masque d'un disque."""
        landmarks = FaceLandmarks.from_array([[50, 50], [100, 50], [75, 75], [60, 100], [90, 100]])
        plain = hull_mask(landmarks, (160, 160))
        grown = hull_mask(landmarks, (160, 160), margin=15)
        assert grown.sum() > plain.sum()
        ys, xs = np.nonzero(grown)
        assert (xs.min(), ys.min(), xs.max(), ys.max()) == (35, 35, 115, 115)
        assert plain[75, 75]
