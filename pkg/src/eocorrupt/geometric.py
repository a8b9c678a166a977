"""Rotation, scaling and translation applied jointly to rasters and annotations.

All transforms keep the canvas size and fill uncovered pixels with 0.0 (or
the background class for masks).  Points use continuous coordinates with the
origin at the top-left image corner; pixel ``(r, c)`` has its centre at
``(c + 0.5, r + 0.5)`` and rotations/scalings pivot on ``(W/2, H/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .annotations import (
    AnnotationSet,
    ClassLabel,
    HorizontalBox,
    HorizontalBoxes,
    OrientedBox,
    OrientedBoxes,
    ReferringRecords,
    SegMask,
)
from .core import ImageRaster
from .errors import UnsupportedAnnotation

__all__ = [
    "AffineMap",
    "warp_array",
    "transform_annotations",
    "rotate",
    "scale",
    "translate",
    "sample_translation",
]


def _snap(v: float) -> float:
    for target in (-1.0, 0.0, 1.0):
        if abs(v - target) < 1e-12:
            return target
    return v


@dataclass(frozen=True, eq=False)
class AffineMap:
    """2x3 matrix sending *output* coordinates to *input* coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64).reshape(2, 3)
        if abs(np.linalg.det(m[:, :2])) <= 1e-9:
            raise ValueError("affine map is not invertible")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def from_forward(cls, linear, center, offset=(0.0, 0.0)) -> "AffineMap":
        """Build from the forward map ``p' = center + linear @ (p - center) + offset``."""
        a = np.asarray(linear, dtype=np.float64)
        c = np.asarray(center, dtype=np.float64)
        t = c + np.asarray(offset, dtype=np.float64) - a @ c
        inv = np.linalg.inv(a)
        inv = np.vectorize(_snap)(inv) if inv.size else inv
        return cls(np.hstack([inv, (-inv @ t)[:, None]]))

    @classmethod
    def rotation(cls, angle: float, width: int, height: int) -> "AffineMap":
        """Counter-clockwise (as displayed, rows growing downwards) about the centre."""
        rad = math.radians(angle)
        c, s = _snap(math.cos(rad)), _snap(math.sin(rad))
        return cls.from_forward([[c, s], [-s, c]], (width / 2.0, height / 2.0))

    @classmethod
    def scaling(cls, ratio: float, width: int, height: int) -> "AffineMap":
        if ratio <= 0:
            raise ValueError("scale ratio must be positive")
        return cls.from_forward([[ratio, 0.0], [0.0, ratio]], (width / 2.0, height / 2.0))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineMap":
        return cls(np.array([[1.0, 0.0, -dx], [0.0, 1.0, -dy]]))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def inverse_matrix(self) -> np.ndarray:
        full = np.vstack([self.matrix, [0.0, 0.0, 1.0]])
        return np.linalg.inv(full)[:2]

    def backward(self, points) -> np.ndarray:
        """Map output-space points ``(N, 2)`` to input space."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return p @ self.matrix[:, :2].T + self.matrix[:, 2]

    def forward(self, points) -> np.ndarray:
        """Map input-space points ``(N, 2)`` to output space."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        fwd = self.inverse_matrix()
        return p @ fwd[:, :2].T + fwd[:, 2]


def warp_array(arr: np.ndarray, amap: AffineMap, order: int = 1, cval: float = 0.0) -> np.ndarray:
    """Resample a 2-D or 3-D (channels last) array through ``amap``.

    ``order`` 1 is bilinear, 0 is nearest-neighbour.  Samples outside the
    source blend towards ``cval`` as if the array were padded with it.
    """
    h, w = arr.shape[:2]
    m = amap.matrix
    cols = np.arange(w, dtype=np.float64) + 0.5
    rows = np.arange(h, dtype=np.float64)[:, None] + 0.5
    # Array index space: pixel (r, c) sits at (r, c) rather than (r + .5, c + .5).
    x = m[0, 0] * cols + m[0, 1] * rows + (m[0, 2] - 0.5)
    y = m[1, 0] * cols + m[1, 1] * rows + (m[1, 2] - 0.5)
    squeeze = arr.ndim == 2
    src = arr[:, :, None] if squeeze else arr
    padded = np.pad(src, ((1, 1), (1, 1), (0, 0)), constant_values=cval)
    flat = padded.reshape(-1, padded.shape[2])
    stride = w + 2

    if order == 0:
        xi = np.floor(x + 0.5)
        yi = np.floor(y + 0.5)
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xi = np.where(inside, xi, -1).astype(np.intp) + 1
        yi = np.where(inside, yi, -1).astype(np.intp) + 1
        out = np.take(flat, yi * stride + xi, axis=0)
    elif order == 1:
        # Beyond one pixel of the border every tap reads the padding.
        x = np.clip(x, -1.0, float(w))
        y = np.clip(y, -1.0, float(h))
        x0 = np.floor(x)
        y0 = np.floor(y)
        fx = (x - x0)[:, :, None]
        fy = (y - y0)[:, :, None]
        x0 = x0.astype(np.intp) + 1
        y0 = y0.astype(np.intp) + 1
        x1 = np.minimum(x0 + 1, w + 1)
        y1 = np.minimum(y0 + 1, h + 1)
        r0, r1 = y0 * stride, y1 * stride
        # In-place lerps; a + (b - a) * t is exact when t == 0.
        top = np.take(flat, r0 + x0, axis=0)
        right = np.take(flat, r0 + x1, axis=0)
        right -= top
        right *= fx
        top += right
        bottom = np.take(flat, r1 + x0, axis=0)
        right = np.take(flat, r1 + x1, axis=0)
        right -= bottom
        right *= fx
        bottom += right
        bottom -= top
        bottom *= fy
        top += bottom
        out = top
        if arr.dtype.kind in "iu":
            out = np.rint(out)
        out = out.astype(arr.dtype, copy=False)
    else:
        raise ValueError("order must be 0 or 1")
    return out[:, :, 0] if squeeze else out


def _clip_box(corners: np.ndarray, width: int, height: int):
    center = corners.mean(axis=0)
    if not (0.0 <= center[0] <= width and 0.0 <= center[1] <= height):
        return None
    out = corners.copy()
    out[:, 0] = np.clip(out[:, 0], 0.0, width)
    out[:, 1] = np.clip(out[:, 1], 0.0, height)
    return out


def _map_box(box, amap: AffineMap, width: int, height: int):
    if isinstance(box, OrientedBox):
        corners = _clip_box(amap.forward(box.corners), width, height)
        return None if corners is None else replace(box, corners=corners)
    if isinstance(box, HorizontalBox):
        mapped = amap.forward(box.corners)
        lo, hi = mapped.min(axis=0), mapped.max(axis=0)
        hull = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
        corners = _clip_box(hull, width, height)
        if corners is None:
            return None
        (x0, y0), (x1, y1) = corners.min(axis=0), corners.max(axis=0)
        return HorizontalBox(float(x0), float(y0), float(x1), float(y1), box.category)
    raise UnsupportedAnnotation(f"not a box: {type(box).__name__}")


def transform_annotations(ann: "AnnotationSet | None", amap: AffineMap, frame: tuple[int, int],
                          background: int = 0) -> "AnnotationSet | None":
    """Co-transform ``ann`` with the map used on its image.

    ``frame`` is ``(width, height)``.  A box survives iff its mapped centre lies
    inside the frame; surviving corners are then clamped to the frame.  Masks
    are resampled nearest-neighbour with ``background`` as fill.
    """
    if ann is None or isinstance(ann, ClassLabel) or amap.is_identity():
        if ann is not None and not isinstance(ann, (ClassLabel, SegMask, OrientedBoxes,
                                                    HorizontalBoxes, ReferringRecords)):
            raise UnsupportedAnnotation(f"unsupported annotation type {type(ann).__name__}")
        return ann
    width, height = frame
    if isinstance(ann, SegMask):
        if ann.mask.shape != (height, width):
            raise ValueError("mask shape does not match the image frame")
        warped = warp_array(ann.mask, amap, order=0, cval=background)
        return SegMask(warped.astype(ann.mask.dtype), ann.palette)
    if isinstance(ann, (OrientedBoxes, HorizontalBoxes)):
        kept = (_map_box(b, amap, width, height) for b in ann.boxes)
        return type(ann)(tuple(b for b in kept if b is not None))
    if isinstance(ann, ReferringRecords):
        records = []
        for rec in ann.records:
            box = _map_box(rec.box, amap, width, height)
            if box is not None:
                records.append(replace(rec, box=box))
        return ReferringRecords(tuple(records))
    raise UnsupportedAnnotation(f"unsupported annotation type {type(ann).__name__}")


def _apply(img: ImageRaster, ann, amap: AffineMap, background: int):
    if amap.is_identity():
        return ImageRaster._wrap(img.data.copy()), ann
    out = np.clip(warp_array(img.data, amap, order=1, cval=0.0), 0.0, 1.0)
    return ImageRaster._wrap(out), transform_annotations(ann, amap, (img.width, img.height),
                                                         background)


def rotate(img: ImageRaster, ann: "AnnotationSet | None", angle: float, background: int = 0):
    """Rotate content counter-clockwise by ``angle`` degrees about the image centre."""
    return _apply(img, ann, AffineMap.rotation(angle, img.width, img.height), background)


def scale(img: ImageRaster, ann: "AnnotationSet | None", ratio: float, background: int = 0):
    """Scale content by ``ratio`` about the image centre, keeping the canvas size."""
    return _apply(img, ann, AffineMap.scaling(ratio, img.width, img.height), background)


def sample_translation(max_shift: int, rng: np.random.Generator) -> tuple[int, int]:
    """Independent uniform integer offsets in ``{-max_shift, ..., max_shift}``."""
    if max_shift < 0:
        raise ValueError("max_shift must be non-negative")
    dx, dy = rng.integers(-max_shift, max_shift, size=2, endpoint=True)
    return int(dx), int(dy)


def translate(img: ImageRaster, ann: "AnnotationSet | None", max_shift: int = 0,
              rng: "np.random.Generator | None" = None,
              offset: "tuple[int, int] | None" = None, background: int = 0):
    """Shift content by an integer offset: ``out(x, y) = in(x - dx, y - dy)``.

    The offset is drawn from ``rng`` unless given explicitly.
    """
    if offset is None:
        if rng is None:
            raise ValueError("either rng or offset is required")
        offset = sample_translation(max_shift, rng)
    dx, dy = (int(v) for v in offset)
    h, w = img.height, img.width
    out = np.zeros_like(img.data)
    src_x, dst_x = slice(max(0, -dx), min(w, w - dx)), slice(max(0, dx), min(w, w + dx))
    src_y, dst_y = slice(max(0, -dy), min(h, h - dy)), slice(max(0, dy), min(h, h + dy))
    if abs(dx) < w and abs(dy) < h:
        out[dst_y, dst_x] = img.data[src_y, src_x]
    amap = AffineMap.translation(dx, dy)
    if isinstance(ann, SegMask) and not amap.is_identity():
        mask = np.full_like(ann.mask, background)
        if abs(dx) < w and abs(dy) < h:
            mask[dst_y, dst_x] = ann.mask[src_y, src_x]
        return ImageRaster._wrap(out), SegMask(mask, ann.palette)
    return ImageRaster._wrap(out), transform_annotations(ann, amap, (w, h), background)
