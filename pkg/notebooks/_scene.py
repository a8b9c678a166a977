"""Small synthetic scene shared by the notebook scripts."""

import numpy as np

from eocorrupt import ImageRaster


def scene(size: int = 256, seed: int = 0) -> ImageRaster:
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size] / size
    field = 0.45 + 0.15 * np.sin(6 * x + 2 * y) * np.cos(5 * y)
    rgb = np.stack([field, field * 1.1, field * 0.8], axis=-1)
    rgb[size // 4:size // 2, size // 3:2 * size // 3] = (0.7, 0.65, 0.55)   # a bright field
    rgb += rng.normal(0, 0.01, rgb.shape)
    return ImageRaster(np.clip(rgb, 0, 1))
