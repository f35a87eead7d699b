import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cropshot.boxes import (
    AugmentMode,
    BoundingBox,
    full_image_box,
    interpolate_context,
    mask_to_box,
    pad_box,
    plan_augments,
)
from cropshot.errors import EmptyMaskError, ValidationError


@st.composite
def box_in_image(draw):
    width = draw(st.integers(2, 400))
    height = draw(st.integers(2, 400))
    x_min = draw(st.integers(0, width - 1))
    x_max = draw(st.integers(x_min + 1, width))
    y_min = draw(st.integers(0, height - 1))
    y_max = draw(st.integers(y_min + 1, height))
    return BoundingBox(x_min, y_min, x_max, y_max), width, height


class TestBoundingBox:
    def test_width_height(self):
        b = BoundingBox(2, 3, 10, 5)
        assert (b.width, b.height) == (8, 2)

    @pytest.mark.parametrize("coords", [(3, 2, 1, 4), (0, 0, 0, 5), (0, 4, 3, 4), (-1, 0, 3, 4)])
    def test_degenerate_rejected(self, coords):
        with pytest.raises(ValidationError):
            BoundingBox(*coords)

    def test_contains(self):
        outer = BoundingBox(0, 0, 10, 10)
        assert outer.contains(BoundingBox(2, 2, 8, 8))
        assert outer.contains(outer)
        assert not BoundingBox(2, 2, 8, 8).contains(outer)

    def test_contains_point_half_open(self):
        b = BoundingBox(2, 3, 10, 5)
        assert b.contains_point(2, 3)
        assert b.contains_point(9, 4)
        assert not b.contains_point(10, 4)
        assert not b.contains_point(9, 5)

    def test_validate_within(self):
        BoundingBox(0, 0, 10, 10).validate_within(10, 10)
        with pytest.raises(ValidationError):
            BoundingBox(0, 0, 11, 10).validate_within(10, 10)

    def test_coords_coerced_to_int(self):
        b = BoundingBox(np.int64(1), 2, np.int32(5), 6)
        assert all(type(v) is int for v in b.as_tuple())


class TestPadBox:
    def test_exact_arithmetic_with_clamp(self):
        assert pad_box(BoundingBox(30, 30, 70, 70), 30, 200, 200) == BoundingBox(0, 0, 100, 100)

    def test_clamped_to_full_image(self):
        assert pad_box(BoundingBox(10, 10, 50, 50), 30, 60, 60) == BoundingBox(0, 0, 60, 60)

    def test_zero_pad_identity(self):
        b = BoundingBox(5, 6, 20, 21)
        assert pad_box(b, 0, 100, 100) == b

    def test_fractional_pad_rounds_outward(self):
        b = pad_box(BoundingBox(10, 10, 20, 20), 2.5, 100, 100)
        assert b == BoundingBox(7, 7, 23, 23)

    def test_negative_pad_rejected(self):
        with pytest.raises(ValidationError):
            pad_box(BoundingBox(1, 1, 2, 2), -1, 10, 10)

    @given(box_in_image(), st.floats(0, 100, allow_nan=False))
    def test_contains_source(self, biw, pad):
        box, w, h = biw
        padded = pad_box(box, pad, w, h)
        assert padded.contains(box)
        padded.validate_within(w, h)


class TestInterpolateContext:
    def test_endpoint_identity(self):
        b = BoundingBox(20, 20, 60, 60)
        assert interpolate_context(b, 0.0, 100, 100) == b

    def test_endpoint_full_image(self):
        b = BoundingBox(20, 20, 60, 60)
        assert interpolate_context(b, 1.0, 100, 100) == full_image_box(100, 100)

    def test_midpoint(self):
        assert interpolate_context(BoundingBox(20, 20, 60, 60), 0.5, 100, 100) == BoundingBox(
            10, 10, 80, 80
        )

    @pytest.mark.parametrize("lam", [-0.01, 1.01, float("nan")])
    def test_fraction_out_of_range(self, lam):
        with pytest.raises(ValidationError):
            interpolate_context(BoundingBox(1, 1, 2, 2), lam, 10, 10)

    @given(box_in_image(), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=300)
    def test_nesting(self, biw, f1, f2):
        box, w, h = biw
        lo, hi = sorted((f1, f2))
        inner = interpolate_context(box, lo, w, h)
        outer = interpolate_context(box, hi, w, h)
        assert outer.contains(inner)
        assert inner.contains(box)
        outer.validate_within(w, h)


class TestMaskToBox:
    def test_single_pixel(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[7, 5] = True  # row y=7, column x=5
        assert mask_to_box(mask) == BoundingBox(5, 7, 6, 8)

    def test_two_extremes(self):
        mask = np.zeros((10, 12), dtype=bool)
        mask[3, 2] = True
        mask[4, 9] = True
        assert mask_to_box(mask) == BoundingBox(2, 3, 10, 5)

    def test_empty_mask(self):
        with pytest.raises(EmptyMaskError):
            mask_to_box(np.zeros((4, 4), dtype=bool))

    @given(st.integers(2, 30), st.integers(2, 30), st.data())
    def test_minimality(self, h, w, data):
        mask = np.zeros((h, w), dtype=bool)
        n = data.draw(st.integers(1, 10))
        for _ in range(n):
            y = data.draw(st.integers(0, h - 1))
            x = data.draw(st.integers(0, w - 1))
            mask[y, x] = True
        box = mask_to_box(mask)
        assert mask[box.y_min : box.y_max, box.x_min : box.x_max].any()
        # shrinking any edge by one pixel must drop at least one true pixel
        count = mask.sum()
        for shrunk in (
            (box.x_min + 1, box.y_min, box.x_max, box.y_max),
            (box.x_min, box.y_min + 1, box.x_max, box.y_max),
            (box.x_min, box.y_min, box.x_max - 1, box.y_max),
            (box.x_min, box.y_min, box.x_max, box.y_max - 1),
        ):
            x0, y0, x1, y1 = shrunk
            inside = mask[y0:y1, x0:x1].sum() if x0 < x1 and y0 < y1 else 0
            assert inside < count


class TestAugmentMode:
    def test_parse_round_trip(self):
        for text in ("replace", "minimal", "pad_px:60", "context_pct:0.5", "multiple"):
            assert str(AugmentMode.parse(text)) == text

    @pytest.mark.parametrize("bad", ["", "pad_px", "pad_px:-2", "context_pct:1.5", "zoom"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValidationError):
            AugmentMode.parse(bad)


class TestPlanAugments:
    B = BoundingBox(100, 100, 160, 150)

    def test_replace_is_padded_crop_without_original(self):
        plan = plan_augments(AugmentMode("replace"), self.B, 400, 400)
        assert plan.crops == (pad_box(self.B, 30, 400, 400),)
        assert plan.keep_original is False

    def test_minimal(self):
        plan = plan_augments(AugmentMode("minimal"), self.B, 400, 400)
        assert plan.crops == (self.B,)
        assert plan.keep_original is True

    def test_pad_px_halved_per_side(self):
        plan = plan_augments(AugmentMode.parse("pad_px:60"), self.B, 400, 400)
        assert plan.crops == (BoundingBox(70, 70, 190, 180),)
        assert plan.keep_original is True

    def test_context_pct(self):
        plan = plan_augments(AugmentMode.parse("context_pct:0.5"), self.B, 400, 400)
        assert plan.crops == (interpolate_context(self.B, 0.5, 400, 400),)

    def test_multiple_three_fractions(self):
        plan = plan_augments(AugmentMode("multiple"), self.B, 400, 400)
        expected = tuple(interpolate_context(self.B, f, 400, 400) for f in (0.2, 0.5, 0.8))
        assert plan.crops == expected
        assert plan.keep_original is True

    def test_duplicates_collapse(self):
        # box equal to the image: every fraction yields the image itself,
        # which duplicates the kept original and is dropped entirely
        b = BoundingBox(0, 0, 40, 40)
        plan = plan_augments(AugmentMode("multiple"), b, 40, 40)
        assert plan.crops == ()
        assert plan.keep_original is True

    def test_replace_keeps_full_image_crop(self):
        # replace discards the original, so a crop clamped to the image
        # border must survive deduplication
        b = BoundingBox(0, 0, 40, 40)
        plan = plan_augments(AugmentMode("replace"), b, 40, 40)
        assert plan.crops == (b,)
        assert plan.keep_original is False

    @given(box_in_image())
    def test_planned_crops_contain_source(self, biw):
        box, w, h = biw
        for mode in ("replace", "minimal", "pad_px:60", "context_pct:0.3", "multiple"):
            plan = plan_augments(AugmentMode.parse(mode), box, w, h)
            for crop in plan.crops:
                assert crop.contains(box)
                crop.validate_within(w, h)

    def test_purity(self):
        a = plan_augments(AugmentMode("multiple"), self.B, 400, 400)
        b = plan_augments(AugmentMode("multiple"), self.B, 400, 400)
        assert a == b
