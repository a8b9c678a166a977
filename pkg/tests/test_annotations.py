import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eocorrupt.annotations import (
    ClassLabel,
    HorizontalBox,
    HorizontalBoxes,
    OrientedBox,
    OrientedBoxes,
    ReferringRecord,
    ReferringRecords,
    SegMask,
    annotation_suffix,
    box_from_json,
    boxes_of,
    dump_annotation,
    format_dota,
    load_annotation_bytes,
    parse_dota,
)
from eocorrupt.errors import AnnotationParseError

DOTA = """imagesource:GoogleEarth
gsd:0.146

10 10 30 10 30 20 10 20 plane 0
40.5 12.25 60 12 60 30 40 30 small-vehicle 1
"""


def test_parse_dota_skips_headers_and_reads_flags():
    ann = parse_dota(DOTA)
    assert [b.category for b in ann.boxes] == ["plane", "small-vehicle"]
    assert [b.difficult for b in ann.boxes] == [False, True]
    assert np.allclose(ann.boxes[1].corners[0], [40.5, 12.25])
    assert np.allclose(ann.boxes[0].center, [20, 15])


def test_dota_round_trip():
    ann = parse_dota(DOTA)
    assert parse_dota(format_dota(ann)) == ann
    assert format_dota(OrientedBoxes(())) == ""


def test_dota_error_names_the_line():
    with pytest.raises(AnnotationParseError, match=r"gt\.txt:2:"):
        parse_dota("1 1 2 1 2 2 1 2 car\n1 1 2 car\n", "gt.txt")
    with pytest.raises(AnnotationParseError, match=":1:"):
        parse_dota("1 1 2 1 2 x 1 2 car 0\n")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=8, max_size=8),
                          st.sampled_from(["ship", "harbor", "tennis-court"]), st.booleans()),
                max_size=6))
def test_dota_round_trip_property(rows):
    ann = OrientedBoxes(tuple(OrientedBox(np.reshape(c, (4, 2)), cat, d) for c, cat, d in rows))
    assert parse_dota(format_dota(ann)) == ann


@pytest.mark.parametrize("ann", [
    ClassLabel(4, "farmland"),
    SegMask(np.random.default_rng(0).integers(0, 7, (9, 11))),
    SegMask(np.array([[0, 1], [2, 1]]), ((0, 0, 0), (255, 0, 0), (0, 255, 0))),
    OrientedBoxes((OrientedBox([[1, 2], [5, 2], [5, 7], [1, 7]], "ship", True),)),
    HorizontalBoxes((HorizontalBox(1, 2, 3.5, 4, "car"), HorizontalBox(0, 0, 1, 1, "bus"))),
    ReferringRecords((ReferringRecord("the red roof", HorizontalBox(3, 3, 9, 8), "q7"),)),
])
def test_dump_load_round_trip(ann):
    blob = dump_annotation(ann)
    assert load_annotation_bytes(blob, annotation_suffix(ann)) == ann


def test_json_errors_carry_source():
    with pytest.raises(AnnotationParseError, match="a.json"):
        load_annotation_bytes(b"{", ".json", "a.json")
    with pytest.raises(AnnotationParseError, match="unrecognised"):
        load_annotation_bytes(b"{}", ".json")
    with pytest.raises(AnnotationParseError):
        load_annotation_bytes(b"", ".xml")


def test_box_from_json_forms():
    assert box_from_json([0, 0, 2, 3]) == HorizontalBox(0, 0, 2, 3)
    assert isinstance(box_from_json([0, 0, 1, 0, 1, 1, 0, 1]), OrientedBox)
    assert box_from_json({"bbox": [1, 1, 2, 2], "category": "a"}).category == "a"
    with pytest.raises(ValueError):
        box_from_json([1, 2, 3])


def test_box_validation_and_boxes_of():
    with pytest.raises(ValueError):
        HorizontalBox(5, 0, 1, 1)
    recs = ReferringRecords((ReferringRecord("x", HorizontalBox(0, 0, 1, 1), "1"),))
    assert boxes_of(recs) == (HorizontalBox(0, 0, 1, 1),)
    assert boxes_of(ClassLabel(0)) == ()
