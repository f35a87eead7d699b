import numpy as np
import pytest

from cropfeat.boxes import iou, is_full_box, mask_to_box, validate_box
from cropfeat.errors import ExtractError


class TestValidateBox:
    def test_valid_box_coerced_to_ints(self):
        assert validate_box([1.0, 2, 3, 4], 10, 10) == (1, 2, 3, 4)

    @pytest.mark.parametrize(
        "box",
        [(0, 0, 11, 5), (0, 0, 5, 11), (-1, 0, 5, 5), (5, 0, 5, 5), (0, 6, 5, 5)],
    )
    def test_out_of_bounds_rejected(self, box):
        with pytest.raises(ExtractError):
            validate_box(box, 10, 10)

    def test_fractional_coordinate_rejected(self):
        with pytest.raises(ExtractError, match="non-integer"):
            validate_box((0, 0, 5.5, 5), 10, 10)

    def test_is_full_box(self):
        assert is_full_box((0, 0, 10, 8), 10, 8)
        assert not is_full_box((0, 0, 10, 7), 10, 8)


class TestMaskToBox:
    def test_minimal_box_matches_nonzero_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            mask = rng.random((20, 30)) < 0.1
            ys, xs = np.nonzero(mask)
            box = mask_to_box(mask)
            if ys.size == 0:
                assert box is None
            else:
                expected = (xs.min(), ys.min(), xs.max() + 1, ys.max() + 1)
                assert box == expected

    def test_empty_mask_is_none(self):
        assert mask_to_box(np.zeros((5, 5), dtype=np.uint8)) is None

    def test_single_pixel(self):
        mask = np.zeros((6, 6), dtype=np.uint8)
        mask[2, 4] = 1
        assert mask_to_box(mask) == (4, 2, 5, 3)

    def test_non_2d_rejected(self):
        with pytest.raises(ExtractError):
            mask_to_box(np.zeros((2, 2, 3)))


class TestIou:
    def test_identical(self):
        assert iou((1, 1, 5, 5), (1, 1, 5, 5)) == 1.0

    def test_disjoint(self):
        assert iou((0, 0, 2, 2), (2, 0, 4, 2)) == 0.0

    def test_half_open_adjacency_does_not_overlap(self):
        assert iou((0, 0, 3, 3), (3, 3, 6, 6)) == 0.0

    def test_hand_value(self):
        # 2x2 overlap, areas 16 and 4; union 16
        assert iou((0, 0, 4, 4), (2, 2, 4, 4)) == pytest.approx(4 / 16)
