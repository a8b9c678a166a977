import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from _synth import quantized, terrain_raster
from eocorrupt.core import ImageRaster
from eocorrupt.errors import EncodeError
from eocorrupt.photometric import (
    JpegCodecConfig,
    brightness_contrast,
    encode_jpeg,
    gaussian_noise,
    haze,
    jpeg_artifacts,
    psnr,
    salt_pepper,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_noise_zero_sigma_is_identity():
    img = quantized(32, 32)
    assert np.array_equal(gaussian_noise(img, 0.0, rng()).data, img.data)


@pytest.mark.parametrize("sigma", [0.04, 0.08])
def test_noise_stdev(sigma):
    img = ImageRaster(np.full((256, 256, 1), 0.5))
    out = gaussian_noise(img, sigma, rng(3))
    assert abs(np.std(out.data - 0.5) - sigma) < 0.005
    assert abs(np.mean(out.data) - 0.5) < 0.002


def test_noise_clamps():
    out = gaussian_noise(ImageRaster(np.ones((64, 64, 3))), 0.5, rng())
    assert out.data.min() >= 0.0 and out.data.max() == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(0.0, 1.0), st.integers(0, 2**32))
def test_salt_pepper_exact_count(h, w, amount, seed):
    img = ImageRaster(np.full((h, w, 3), 0.5))
    out = salt_pepper(img, amount, rng(seed))
    changed = np.any(out.data != 0.5, axis=2)
    k = int(np.floor(amount * h * w + 0.5))
    assert changed.sum() == k
    salt = np.all(out.data == 1.0, axis=2).sum()
    assert salt == (k + 1) // 2
    assert np.all(np.isin(out.data[changed], (0.0, 1.0)))


def test_salt_pepper_zero_amount():
    img = quantized(16, 16)
    assert np.array_equal(salt_pepper(img, 0.0, rng()).data, img.data)


def test_brightness_contrast_formula():
    arr = np.linspace(0, 1, 11).reshape(1, 11, 1)
    out = brightness_contrast(ImageRaster(arr), 0.2, 0.6).data
    assert np.allclose(out, np.clip((arr - 0.5) * 0.6 + 0.7, 0, 1))
    img = quantized(8, 8)
    assert np.array_equal(brightness_contrast(img, 0.0, 1.0).data, img.data)


def test_haze_formula_and_limits():
    arr = np.linspace(0, 1, 11).reshape(1, 11, 1)
    assert np.allclose(haze(ImageRaster(arr), 0.4).data, 0.6 * arr + 0.4)
    assert np.all(haze(ImageRaster(arr), 1.0).data == 1.0)
    with pytest.raises(ValueError):
        haze(ImageRaster(arr), 1.2)


def test_haze_reduces_contrast_monotonically():
    img = terrain_raster(32, 32)
    stds = [np.std(haze(img, a).data) for a in (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)]
    assert all(a > b for a, b in zip(stds, stds[1:]))


@pytest.mark.parametrize("quality", [10, 15, 20, 25, 30, 50, 75, 95])
def test_quant_tables_match_reference_scaling(quality):
    # libjpeg's own quality scaling is the oracle.
    img = Image.fromarray(np.zeros((16, 16, 3), np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=quality)
    with Image.open(io.BytesIO(buf.getvalue())) as ref:
        tables = ref.quantization
    cfg = JpegCodecConfig(quality)
    assert list(tables[0]) == cfg.luma_table
    assert list(tables[1]) == cfg.chroma_table


def test_encoded_file_carries_configured_tables():
    blob = encode_jpeg(quantized(32, 32), 20)
    with Image.open(io.BytesIO(blob)) as im:
        assert list(im.quantization[0]) == JpegCodecConfig(20).luma_table
        assert im.layers == 3


def test_jpeg_preserves_shape_and_loses_more_at_low_quality():
    img = terrain_raster(64, 64, grain=0.05)
    scores = [psnr(img, jpeg_artifacts(img, q)) for q in (30, 25, 20, 15, 10)]
    assert all(a > b for a, b in zip(scores, scores[1:]))
    gray = ImageRaster(img.data[:, :, :1])
    assert jpeg_artifacts(gray, 20).shape == gray.shape


def test_jpeg_rejects_unsupported_channels():
    with pytest.raises(EncodeError):
        encode_jpeg(ImageRaster(np.zeros((8, 8, 4))), 20)
    with pytest.raises(ValueError):
        JpegCodecConfig(0)


def test_salt_pepper_hundred_sites_split_evenly():
    img = ImageRaster(np.full((100, 100, 3), 0.5))
    out = salt_pepper(img, 0.01, rng(5))
    assert np.all(out.data == 1.0, axis=2).sum() == 50
    assert np.all(out.data == 0.0, axis=2).sum() == 50


def test_brightness_contrast_severity5_points():
    img = ImageRaster(np.array([[[0.5], [1.0]]]))
    out = brightness_contrast(img, 0.4, 0.2).data.ravel()
    assert out[0] == pytest.approx(0.9)
    assert out[1] == 1.0


def test_haze_on_black():
    assert haze(ImageRaster(np.zeros((1, 1, 1))), 0.6).data[0, 0, 0] == pytest.approx(0.6)


def test_jpeg_quality_100_on_smooth_gradient():
    ramp = np.linspace(0, 1, 64)
    arr = np.stack([np.tile(ramp, (64, 1)), np.tile(ramp[:, None], (1, 64)),
                    np.full((64, 64), 0.5)], axis=2)
    img = ImageRaster.from_uint8(np.rint(arr * 255).astype(np.uint8))
    assert psnr(img, jpeg_artifacts(img, 100)) > 40


def test_jpeg_size_shrinks_with_quality():
    img = terrain_raster(64, 64, grain=0.04)
    assert len(encode_jpeg(img, 10)) < len(encode_jpeg(img, 30))


def test_jpeg_tables_grow_as_quality_drops():
    tables = [np.array(JpegCodecConfig(q).luma_table) for q in (30, 25, 20, 15, 10)]
    assert all(np.all(a <= b) and np.any(a < b) for a, b in zip(tables, tables[1:]))
