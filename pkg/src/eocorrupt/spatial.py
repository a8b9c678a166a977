"""Neighbourhood and occlusion corruptions: blurs, Perlin clouds and data gaps.

Convolutions use scipy's ``reflect`` boundary mode (``d c b a | a b c d``),
which keeps constant images constant up to rounding.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .core import ImageRaster
from .errors import GapOverflow, InvalidKernel

__all__ = [
    "gaussian_kernel_1d",
    "gaussian_blur",
    "motion_kernel",
    "motion_blur",
    "perlin_field",
    "cloud_alpha",
    "cloud",
    "sample_gap_offsets",
    "data_gaps",
]


def gaussian_kernel_1d(k: int) -> np.ndarray:
    """Normalized ``k``-tap Gaussian with ``sigma = (k - 1) / 6``."""
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise InvalidKernel(f"Gaussian kernel size must be a positive odd integer, got {k!r}")
    if k == 1:
        return np.ones(1)
    sigma = (k - 1) / 6.0
    x = np.arange(k) - (k - 1) / 2
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_blur(img: ImageRaster, kernel_size: int) -> ImageRaster:
    w = gaussian_kernel_1d(kernel_size)
    if kernel_size == 1:
        return ImageRaster._wrap(img.data.copy())
    out = ndimage.correlate1d(img.data, w, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, w, axis=1, mode="reflect")
    return ImageRaster._wrap(np.clip(out, 0.0, 1.0))


def motion_kernel(k: int, angle: float) -> np.ndarray:
    """Length-``k`` line through the centre of a ``k x k`` grid, uniform weights.

    ``angle`` is in degrees, counter-clockwise from the +x axis as displayed
    (rows grow downwards).
    """
    if k < 1:
        raise InvalidKernel(f"motion kernel size must be >= 1, got {k}")
    k = int(k)
    kernel = np.zeros((k, k))
    c = (k - 1) / 2.0
    t = np.linspace(-c, c, 4 * k + 1)
    rad = math.radians(angle)
    cols = np.floor(c + t * math.cos(rad) + 0.5).astype(int)
    rows = np.floor(c - t * math.sin(rad) + 0.5).astype(int)
    kernel[np.clip(rows, 0, k - 1), np.clip(cols, 0, k - 1)] = 1.0
    return kernel / kernel.sum()


def motion_blur(img: ImageRaster, kernel_size: int, angle: float) -> ImageRaster:
    kernel = motion_kernel(kernel_size, angle)
    if kernel.size == 1:
        return ImageRaster._wrap(img.data.copy())
    out = np.empty_like(img.data)
    for ch in range(img.channels):
        ndimage.convolve(img.data[:, :, ch], kernel, output=out[:, :, ch], mode="reflect")
    return ImageRaster._wrap(np.clip(out, 0.0, 1.0))


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin_field(width: int, height: int, octaves: int = 4, period: float = 64.0,
                 persistence: float = 0.5, seed: int = 0) -> np.ndarray:
    """Fractal (fBm) gradient noise, min-max normalized to ``[0, 1]``.

    Octave ``o`` has lattice spacing ``period / 2**o`` and amplitude
    ``persistence**o``.  Returns a ``(height, width)`` float array.
    """
    if period < 2:
        raise ValueError("period must be at least 2 pixels")
    if octaves < 1:
        raise ValueError("octaves must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=int(seed) % 2**128))
    # float32 accumulation: the field only drives cloud opacity, and halving
    # memory traffic halves the run time.
    total = np.zeros((height, width), dtype=np.float32)
    amp = 1.0
    for octave in range(octaves):
        spacing = period / 2**octave
        nx = int(math.ceil(width / spacing)) + 2
        ny = int(math.ceil(height / spacing)) + 2
        theta = rng.uniform(0.0, 2.0 * math.pi, size=(ny, nx))
        gx = np.cos(theta).astype(np.float32)
        gy = np.sin(theta).astype(np.float32)

        xs = (np.arange(width) + 0.5) / spacing
        ys = (np.arange(height) + 0.5) / spacing
        x0 = np.floor(xs).astype(np.intp)
        y0 = np.floor(ys).astype(np.intp)
        fx = (xs - x0).astype(np.float32)[None, :]
        fy = (ys - y0).astype(np.float32)[:, None]

        def corner(dx, dy):
            # Gradient at lattice node (y0 + dy, x0 + dx) dotted with the offset.
            out = np.take(gx[y0 + dy], x0 + dx, axis=1)
            out *= fx - dx
            out += np.take(gy[y0 + dy], x0 + dx, axis=1) * (fy - dy)
            return out

        u, v = _fade(fx), _fade(fy)
        top, top_r = corner(0, 0), corner(1, 0)
        top_r -= top
        top_r *= u
        top += top_r
        bottom, bottom_r = corner(0, 1), corner(1, 1)
        bottom_r -= bottom
        bottom_r *= u
        bottom += bottom_r
        bottom -= top
        bottom *= v
        top += bottom
        top *= np.float32(amp)
        total += top
        amp *= persistence

    total = total.astype(np.float64)
    lo, hi = total.min(), total.max()
    if hi <= lo:
        return np.zeros_like(total)
    return (total - lo) / (hi - lo)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def cloud_alpha(field: np.ndarray, threshold: float) -> np.ndarray:
    """Soft cloud opacity: zero below ``threshold``, smoothstep ramp above it."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("cloud threshold must lie in (0, 1]")
    if threshold >= 1.0:
        return np.zeros_like(field)
    ramp = _smoothstep((field - threshold) / (1.0 - threshold))
    return np.where(field > threshold, ramp, 0.0)


def cloud(img: ImageRaster, threshold: float, seed: int, octaves: int = 4,
          period: "float | None" = None, persistence: float = 0.5) -> ImageRaster:
    """Overlay white Perlin clouds wherever the noise field exceeds ``threshold``.

    Lower thresholds give larger coverage.  Pixels outside the cloud support
    are returned unchanged.
    """
    if period is None:
        period = img.width / 4.0
    field = perlin_field(img.width, img.height, octaves, period, persistence, seed)
    alpha = cloud_alpha(field, threshold)[:, :, None]
    blended = (1.0 - alpha) * img.data + alpha
    out = np.where(alpha > 0.0, np.clip(blended, 0.0, 1.0), img.data)
    return ImageRaster._wrap(out)


def sample_gap_offsets(width: int, num_gaps: int, gap_width: int,
                       rng: np.random.Generator) -> list[int]:
    """Uniformly random left edges for non-overlapping stripes, sorted."""
    free = width - num_gaps * gap_width
    if num_gaps < 0 or gap_width < 0 or free < 0:
        raise GapOverflow(
            f"{num_gaps} stripes of width {gap_width} do not fit in {width} columns")
    if num_gaps == 0:
        return []
    # Stars and bars: pick slots among free + n positions, then spread them.
    slots = np.sort(rng.choice(free + num_gaps, size=num_gaps, replace=False))
    return [int(s) + i * (gap_width - 1) for i, s in enumerate(slots)]


def data_gaps(img: ImageRaster, num_gaps: int, gap_width: int,
              rng: "np.random.Generator | None" = None,
              offsets: "list[int] | None" = None) -> ImageRaster:
    """Zero ``num_gaps`` full-height vertical stripes of ``gap_width`` columns."""
    if offsets is None:
        if rng is None:
            raise ValueError("either rng or offsets is required")
        offsets = sample_gap_offsets(img.width, num_gaps, gap_width, rng)
    else:
        offsets = sorted(int(x) for x in offsets)
        if len(offsets) != num_gaps:
            raise ValueError("one offset per stripe is required")
        for a, b in zip(offsets, offsets[1:]):
            if b - a < gap_width:
                raise GapOverflow("stripes overlap")
        if offsets and (offsets[0] < 0 or offsets[-1] + gap_width > img.width):
            raise GapOverflow("stripe outside the image")
    out = img.data.copy()
    for x in offsets:
        out[:, x:x + gap_width, :] = 0.0
    return ImageRaster._wrap(out)
