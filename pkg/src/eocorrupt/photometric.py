"""Value-domain corruptions: noise, brightness/contrast, haze and JPEG artifacts."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .core import ImageRaster, _pil_to_raster
from .errors import EncodeError

__all__ = [
    "JpegCodecConfig",
    "gaussian_noise",
    "salt_pepper",
    "brightness_contrast",
    "haze",
    "jpeg_artifacts",
    "encode_jpeg",
    "psnr",
]


def gaussian_noise(img: ImageRaster, sigma: float, rng: np.random.Generator) -> ImageRaster:
    """Add i.i.d. ``N(0, sigma^2)`` noise to every sample and clamp to ``[0, 1]``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    noise = rng.normal(0.0, 1.0, size=img.shape) * sigma
    return ImageRaster._wrap(np.clip(img.data + noise, 0.0, 1.0))


def salt_pepper(img: ImageRaster, amount: float, rng: np.random.Generator) -> ImageRaster:
    """Replace exactly ``round(amount * W * H)`` whole pixels with white or black.

    Sites are drawn without replacement; the first ``ceil(k / 2)`` become salt
    (1.0 in every channel) and the remainder pepper (0.0).
    """
    if not 0.0 <= amount <= 1.0:
        raise ValueError("amount must lie in [0, 1]")
    n_pixels = img.width * img.height
    k = int(math.floor(amount * n_pixels + 0.5))
    out = img.data.copy()
    if k:
        sites = rng.choice(n_pixels, size=k, replace=False)
        flat = out.reshape(n_pixels, img.channels)
        n_salt = (k + 1) // 2
        flat[sites[:n_salt]] = 1.0
        flat[sites[n_salt:]] = 0.0
    return ImageRaster._wrap(out)


def brightness_contrast(img: ImageRaster, brightness: float, contrast: float) -> ImageRaster:
    """``clamp((v - 0.5) * contrast + 0.5 + brightness)`` applied per sample."""
    if contrast < 0:
        raise ValueError("contrast must be non-negative")
    if brightness == 0.0 and contrast == 1.0:
        return ImageRaster._wrap(img.data.copy())
    out = (img.data - 0.5) * contrast + 0.5 + brightness
    return ImageRaster._wrap(np.clip(out, 0.0, 1.0))


def haze(img: ImageRaster, intensity: float) -> ImageRaster:
    """Blend uniformly with a white layer: ``(1 - a) * v + a``."""
    if not 0.0 <= intensity <= 1.0:
        raise ValueError("intensity must lie in [0, 1]")
    if intensity == 0.0:
        return ImageRaster._wrap(img.data.copy())
    out = (1.0 - intensity) * img.data + intensity
    return ImageRaster._wrap(np.clip(out, 0.0, 1.0))


# ITU-T T.81 Annex K example tables, natural (row-major) order.
_LUMA_BASE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
])
_CHROMA_BASE = np.full(64, 99)
_CHROMA_BASE.reshape(8, 8)[:4, :4] = [
    [17, 18, 24, 47],
    [18, 21, 26, 66],
    [24, 26, 56, 99],
    [47, 66, 99, 99],
]


@dataclass(frozen=True)
class JpegCodecConfig:
    """Baseline JPEG settings: 4:2:0 chroma subsampling, IJG-scaled Annex K tables."""

    quality: int

    def __post_init__(self):
        if not 1 <= int(self.quality) <= 100:
            raise ValueError("JPEG quality must lie in 1..100")

    @property
    def scale_percent(self) -> int:
        q = int(self.quality)
        return 5000 // q if q < 50 else 200 - 2 * q

    def _scaled(self, base: np.ndarray) -> list[int]:
        table = (base * self.scale_percent + 50) // 100
        return np.clip(table, 1, 255).astype(int).tolist()

    @property
    def luma_table(self) -> list[int]:
        return self._scaled(_LUMA_BASE)

    @property
    def chroma_table(self) -> list[int]:
        return self._scaled(_CHROMA_BASE)


def encode_jpeg(img: ImageRaster, quality: int) -> bytes:
    """Encode as baseline JPEG with :class:`JpegCodecConfig` tables."""
    cfg = JpegCodecConfig(quality)
    arr = img.to_uint8()
    if img.channels == 1:
        im = Image.fromarray(arr[:, :, 0])
        qtables = [cfg.luma_table]
    elif img.channels == 3:
        im = Image.fromarray(arr)
        qtables = [cfg.luma_table, cfg.chroma_table]
    else:
        raise EncodeError(f"JPEG needs 1 or 3 channels, got {img.channels}")
    buf = io.BytesIO()
    im.save(buf, format="JPEG", qtables=qtables, subsampling=2, optimize=False,
            progressive=False)
    return buf.getvalue()


def jpeg_artifacts(img: ImageRaster, quality: int) -> ImageRaster:
    """Round-trip through the JPEG codec at ``quality``; shape is preserved."""
    blob = encode_jpeg(img, quality)
    with Image.open(io.BytesIO(blob)) as im:
        im.load()
        return _pil_to_raster(im)


def psnr(a: ImageRaster, b: ImageRaster) -> float:
    mse = float(np.mean((a.data - b.data) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)
