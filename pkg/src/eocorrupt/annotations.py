"""Ground-truth annotation types and their on-disk formats.

Coordinates are continuous pixel coordinates with the origin at the top-left
corner of the image, so pixel ``(row, col)`` covers ``[col, col+1) x [row, row+1)``
and the image centre sits at ``(W/2, H/2)``.  DOTA-style label files use this
convention.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from PIL import Image

from .errors import AnnotationParseError, UnsupportedAnnotation

__all__ = [
    "ClassLabel",
    "SegMask",
    "OrientedBox",
    "OrientedBoxes",
    "HorizontalBox",
    "HorizontalBoxes",
    "ReferringRecord",
    "ReferringRecords",
    "AnnotationSet",
    "parse_dota",
    "format_dota",
    "dump_annotation",
    "load_annotation_bytes",
    "annotation_suffix",
]


def _as_corners(corners) -> np.ndarray:
    arr = np.asarray(corners, dtype=np.float64).reshape(4, 2)
    if not np.all(np.isfinite(arr)):
        raise ValueError("box coordinates must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ClassLabel:
    category_id: int
    category: str = ""


@dataclass(frozen=True, eq=False)
class SegMask:
    """Class-index mask; ``palette`` optionally maps class index to RGB."""

    mask: np.ndarray
    palette: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not np.issubdtype(m.dtype, np.integer):
            raise ValueError("mask must hold integer class indices")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "palette", tuple(tuple(c) for c in self.palette))

    def __eq__(self, other):
        if not isinstance(other, SegMask):
            return NotImplemented
        return np.array_equal(self.mask, other.mask) and self.palette == other.palette


@dataclass(frozen=True, eq=False)
class OrientedBox:
    corners: np.ndarray
    category: str
    difficult: bool = False

    def __post_init__(self):
        object.__setattr__(self, "corners", _as_corners(self.corners))

    @property
    def center(self) -> np.ndarray:
        return self.corners.mean(axis=0)

    def __eq__(self, other):
        if not isinstance(other, OrientedBox):
            return NotImplemented
        return (np.array_equal(self.corners, other.corners)
                and self.category == other.category and self.difficult == other.difficult)


@dataclass(frozen=True)
class HorizontalBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    category: str = ""

    def __post_init__(self):
        vals = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("box coordinates must be finite")
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise ValueError("horizontal box has negative extent")

    @property
    def corners(self) -> np.ndarray:
        return np.array([[self.xmin, self.ymin], [self.xmax, self.ymin],
                         [self.xmax, self.ymax], [self.xmin, self.ymax]], dtype=np.float64)

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2])


@dataclass(frozen=True)
class OrientedBoxes:
    boxes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class HorizontalBoxes:
    boxes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class ReferringRecord:
    expression: str
    box: Union[OrientedBox, HorizontalBox]
    record_id: str = ""


@dataclass(frozen=True)
class ReferringRecords:
    records: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))


AnnotationSet = Union[ClassLabel, SegMask, OrientedBoxes, HorizontalBoxes, ReferringRecords]


# --- DOTA text -------------------------------------------------------------

def parse_dota(text: str, source: str = "<string>") -> OrientedBoxes:
    """Parse DOTA-style lines ``x1 y1 x2 y2 x3 y3 x4 y4 category difficult``.

    ``imagesource:`` / ``gsd:`` header lines and blank lines are skipped.  The
    difficulty field is optional and defaults to 0.
    """
    boxes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("imagesource", "gsd")):
            continue
        parts = line.split()
        if len(parts) not in (9, 10):
            raise AnnotationParseError(
                f"{source}:{lineno}: expected 8 coordinates, a category and an optional "
                f"difficulty flag, got {len(parts)} fields")
        try:
            coords = [float(p) for p in parts[:8]]
            difficult = bool(int(parts[9])) if len(parts) == 10 else False
            boxes.append(OrientedBox(np.reshape(coords, (4, 2)), parts[8], difficult))
        except ValueError as exc:
            raise AnnotationParseError(f"{source}:{lineno}: {exc}") from exc
    return OrientedBoxes(tuple(boxes))


def _fmt_num(v: float) -> str:
    # Shortest repr that round-trips; integers print without a fraction.
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def format_dota(ann: OrientedBoxes) -> str:
    lines = []
    for box in ann.boxes:
        coords = " ".join(_fmt_num(v) for v in box.corners.ravel())
        lines.append(f"{coords} {box.category} {int(box.difficult)}")
    return "\n".join(lines) + ("\n" if lines else "")


# --- JSON helpers -----------------------------------------------------------

def _box_to_json(box) -> dict:
    if isinstance(box, OrientedBox):
        return {"type": "oriented", "corners": box.corners.ravel().tolist(),
                "category": box.category, "difficult": box.difficult}
    if isinstance(box, HorizontalBox):
        return {"type": "horizontal", "bbox": [box.xmin, box.ymin, box.xmax, box.ymax],
                "category": box.category}
    raise UnsupportedAnnotation(f"not a box: {type(box).__name__}")


def box_from_json(obj) -> Union[OrientedBox, HorizontalBox]:
    """Accept a tagged dict, an 8-number corner list or a 4-number xyxy list."""
    if isinstance(obj, dict):
        if obj.get("type") == "horizontal" or "bbox" in obj:
            x0, y0, x1, y1 = obj["bbox"]
            return HorizontalBox(x0, y0, x1, y1, obj.get("category", ""))
        return OrientedBox(obj["corners"], obj.get("category", ""), bool(obj.get("difficult", False)))
    seq = list(obj)
    if len(seq) == 8:
        return OrientedBox(seq, "")
    if len(seq) == 4:
        return HorizontalBox(*map(float, seq))
    raise ValueError(f"a box needs 4 or 8 numbers, got {len(seq)}")


def _dumps(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def annotation_suffix(ann: AnnotationSet) -> str:
    if isinstance(ann, SegMask):
        return ".png"
    if isinstance(ann, OrientedBoxes):
        return ".txt"
    return ".json"


def dump_annotation(ann: AnnotationSet) -> bytes:
    """Serialize an annotation to the bytes of its canonical file format."""
    if isinstance(ann, ClassLabel):
        return _dumps({"category_id": ann.category_id, "category": ann.category})
    if isinstance(ann, SegMask):
        if ann.mask.min(initial=0) < 0 or ann.mask.max(initial=0) > 255:
            raise ValueError("class indices must fit in 8 bits for PNG masks")
        buf = io.BytesIO()
        im = Image.fromarray(ann.mask.astype(np.uint8))
        if ann.palette:
            im = im.convert("P")
            flat = [c for rgb in ann.palette for c in rgb]
            im.putpalette(flat + [0] * (768 - len(flat)))
        im.save(buf, format="PNG")
        return buf.getvalue()
    if isinstance(ann, OrientedBoxes):
        return format_dota(ann).encode("utf-8")
    if isinstance(ann, HorizontalBoxes):
        return _dumps({"boxes": [_box_to_json(b) for b in ann.boxes]})
    if isinstance(ann, ReferringRecords):
        return _dumps({"records": [
            {"id": r.record_id, "expression": r.expression, "box": _box_to_json(r.box)}
            for r in ann.records]})
    raise UnsupportedAnnotation(f"unsupported annotation type {type(ann).__name__}")


def load_annotation_bytes(blob: bytes, suffix: str, source: str = "<bytes>") -> AnnotationSet:
    """Inverse of :func:`dump_annotation`; ``suffix`` selects the parser."""
    if suffix == ".png":
        with Image.open(io.BytesIO(blob)) as im:
            palette = ()
            if im.mode == "P":
                pal = im.getpalette() or []
                n = int(np.asarray(im).max(initial=0)) + 1
                palette = tuple(tuple(pal[3 * i:3 * i + 3]) for i in range(n))
            elif im.mode != "L":
                raise AnnotationParseError(f"{source}: masks must be single-channel class indices")
            return SegMask(np.asarray(im).astype(np.int64), palette)
    if suffix == ".txt":
        return parse_dota(blob.decode("utf-8"), source)
    if suffix == ".json":
        try:
            obj = json.loads(blob.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise AnnotationParseError(f"{source}:{exc.lineno}: {exc.msg}") from exc
        return annotation_from_json(obj, source)
    raise AnnotationParseError(f"{source}: unknown annotation suffix {suffix!r}")


def annotation_from_json(obj, source: str = "<json>") -> AnnotationSet:
    try:
        if "category_id" in obj:
            return ClassLabel(int(obj["category_id"]), obj.get("category", ""))
        if "boxes" in obj:
            return HorizontalBoxes(tuple(box_from_json(b) for b in obj["boxes"]))
        if "records" in obj:
            return ReferringRecords(tuple(
                ReferringRecord(r["expression"], box_from_json(r["box"]), str(r.get("id", "")))
                for r in obj["records"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise AnnotationParseError(f"{source}: {exc}") from exc
    raise AnnotationParseError(f"{source}: unrecognised annotation document")


def boxes_of(ann: AnnotationSet) -> Sequence:
    if isinstance(ann, (OrientedBoxes, HorizontalBoxes)):
        return ann.boxes
    if isinstance(ann, ReferringRecords):
        return tuple(r.box for r in ann.records)
    return ()
