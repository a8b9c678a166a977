import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _synth import quantized
from eocorrupt.annotations import (
    ClassLabel,
    HorizontalBox,
    HorizontalBoxes,
    OrientedBox,
    OrientedBoxes,
    ReferringRecord,
    ReferringRecords,
    SegMask,
)
from eocorrupt.core import ImageRaster
from eocorrupt.errors import UnsupportedAnnotation
from eocorrupt.geometric import (
    AffineMap,
    rotate,
    sample_translation,
    scale,
    transform_annotations,
    translate,
    warp_array,
)


def one_hot(h, w, row, col):
    arr = np.zeros((h, w, 1))
    arr[row, col, 0] = 1.0
    return ImageRaster(arr)


@pytest.mark.parametrize("quarters", [1, 2, 3])
def test_quarter_turns_are_exact_permutations(quarters):
    img = quantized(64, 64, seed=2)
    out, _ = rotate(img, None, 90.0 * quarters)
    assert np.array_equal(out.data, np.rot90(img.data, quarters, axes=(0, 1)))


def test_quarter_turn_formula():
    h = 8
    arr = np.arange(h * h, dtype=float).reshape(h, h, 1) / (h * h)
    out = rotate(ImageRaster(arr), None, 90.0)[0].data
    for r in range(h):
        for c in range(h):
            assert out[r, c, 0] == arr[c, h - 1 - r, 0]


def test_rotated_one_hot_lands_where_documented():
    out, _ = rotate(one_hot(100, 100, 10, 20), None, 90.0)
    assert np.unravel_index(np.argmax(out.data[:, :, 0]), (100, 100)) == (79, 10)
    # Continuous coordinates: pixel centre (x=20.5, y=10.5) -> (10.5, 79.5).
    fwd = AffineMap.rotation(90.0, 100, 100).forward([[20.5, 10.5]])
    assert np.allclose(fwd, [[10.5, 79.5]])


def test_scale_point_example():
    assert np.allclose(AffineMap.scaling(0.5, 100, 100).forward([[80, 60]]), [[65, 55]])


def test_scale_one_is_identity():
    img = quantized(33, 47)
    boxes = OrientedBoxes((OrientedBox([[1, 1], [9, 1], [9, 5], [1, 5]], "car"),))
    out, ann = scale(img, boxes, 1.0)
    assert np.array_equal(out.data, img.data) and ann == boxes


@settings(max_examples=50, deadline=None)
@given(st.floats(-360, 360), st.floats(0.2, 3), st.floats(-20, 20), st.floats(-20, 20))
def test_forward_backward_inverse(angle, ratio, dx, dy):
    pts = np.random.default_rng(0).uniform(-50, 150, (10, 2))
    for amap in (AffineMap.rotation(angle, 100, 80), AffineMap.scaling(ratio, 100, 80),
                 AffineMap.translation(dx, dy)):
        assert np.allclose(amap.backward(amap.forward(pts)), pts, atol=1e-9)


def test_oriented_box_rotation_matches_per_corner_oracle():
    corners = np.array([[40.0, 45.0], [60.0, 45.0], [60.0, 55.0], [40.0, 55.0]])
    box = OrientedBoxes((OrientedBox(corners, "ship"),))
    out = transform_annotations(box, AffineMap.rotation(45.0, 100, 100), (100, 100))
    t = math.radians(45.0)
    # Counter-clockwise on screen (y down): x' = c + (x-c)cos + (y-c)sin, y' = c - (x-c)sin + (y-c)cos.
    d = corners - 50.0
    expected = 50.0 + np.stack([d[:, 0] * math.cos(t) + d[:, 1] * math.sin(t),
                                -d[:, 0] * math.sin(t) + d[:, 1] * math.cos(t)], axis=1)
    assert np.allclose(out.boxes[0].corners, expected)


def test_mask_rotation_is_the_pixel_permutation():
    mask = np.random.default_rng(1).integers(0, 6, (32, 32))
    img = ImageRaster(np.zeros((32, 32, 1)))
    _, ann = rotate(img, SegMask(mask), 90.0)
    assert np.array_equal(ann.mask, np.rot90(mask))


def test_mask_fill_uses_background_class():
    mask = np.ones((20, 20), dtype=np.int64)
    _, ann = scale(ImageRaster(np.zeros((20, 20, 1))), SegMask(mask), 0.5, background=7)
    assert ann.mask[0, 0] == 7 and ann.mask[10, 10] == 1
    assert set(np.unique(ann.mask)) == {1, 7}


def test_translate_forced_offset():
    img = quantized(12, 20)
    boxes = HorizontalBoxes((HorizontalBox(2, 3, 6, 8, "a"),))
    out, ann = translate(img, boxes, offset=(5, 0))
    assert np.array_equal(out.data[:, 5:], img.data[:, :-5])
    assert np.all(out.data[:, :5] == 0.0)
    assert ann.boxes[0] == HorizontalBox(7, 3, 11, 8, "a")


def test_translate_zero_is_identity():
    img = quantized(16, 16)
    ann = OrientedBoxes((OrientedBox([[1, 1], [5, 1], [5, 5], [1, 5]], "x"),))
    out, out_ann = translate(img, ann, offset=(0, 0))
    assert np.array_equal(out.data, img.data) and out_ann == ann


def test_box_with_center_outside_is_dropped_and_kept_boxes_clamped():
    boxes = OrientedBoxes((
        OrientedBox([[1, 1], [5, 1], [5, 5], [1, 5]], "gone"),
        OrientedBox([[14, 2], [19, 2], [19, 6], [14, 6]], "edge"),
    ))
    out = transform_annotations(boxes, AffineMap.translation(-6, 0), (20, 20))
    assert [b.category for b in out.boxes] == ["edge"]
    out = transform_annotations(boxes, AffineMap.translation(2, 0), (20, 20))
    edge = [b for b in out.boxes if b.category == "edge"][0]
    assert edge.corners[:, 0].max() == 20.0


def test_referring_records_follow_their_box():
    recs = ReferringRecords((
        ReferringRecord("left tank", HorizontalBox(0, 0, 4, 4), "r1"),
        ReferringRecord("right tank", HorizontalBox(10, 10, 14, 14), "r2"),
    ))
    out = transform_annotations(recs, AffineMap.translation(-5, -5), (16, 16))
    assert [r.record_id for r in out.records] == ["r2"]
    assert out.records[0].box == HorizontalBox(5, 5, 9, 9)


def test_identity_and_label_pass_through():
    label = ClassLabel(3, "forest")
    assert transform_annotations(label, AffineMap.rotation(30, 10, 10), (10, 10)) is label
    boxes = OrientedBoxes(())
    assert transform_annotations(boxes, AffineMap.identity(), (10, 10)) is boxes
    with pytest.raises(UnsupportedAnnotation):
        transform_annotations("junk", AffineMap.rotation(30, 10, 10), (10, 10))


def test_warp_matches_reference_resampler():
    from scipy import ndimage

    arr = np.random.default_rng(3).random((40, 50))
    amap = AffineMap.rotation(33.0, 50, 40)
    m = amap.matrix
    # Same map in array-index space (row, col), as scipy expects.
    matrix = np.array([[m[1, 1], m[1, 0]], [m[0, 1], m[0, 0]]])
    offset = np.array([m[1, 2] + 0.5 * (m[1, 0] + m[1, 1]) - 0.5,
                       m[0, 2] + 0.5 * (m[0, 0] + m[0, 1]) - 0.5])
    ref = ndimage.affine_transform(arr, matrix, offset, order=1, mode="grid-constant", cval=0.0)
    assert np.allclose(warp_array(arr, amap), ref, atol=1e-12)


def test_sample_translation_range_and_determinism():
    rng = np.random.default_rng(0)
    draws = np.array([sample_translation(3, rng) for _ in range(2000)])
    assert draws.min() == -3 and draws.max() == 3
    a = sample_translation(35, np.random.default_rng(9))
    assert a == sample_translation(35, np.random.default_rng(9))
