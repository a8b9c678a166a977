import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from eocorrupt.core import (
    SEVERITY_TABLE,
    Category,
    CorruptionKind,
    CorruptionSpec,
    ImageRaster,
    derive_stream,
    encode_png,
    load_image,
    save_image,
    severity_params,
)
from eocorrupt.errors import DecodeError, InvalidSeverity, UnknownCorruption, UnsupportedFormat

K = CorruptionKind


def test_twelve_kinds_and_categories():
    assert len(K) == 12
    env = {k for k in K if k.category is Category.ENVIRONMENTAL}
    geo = {k for k in K if k.category is Category.GEOMETRIC}
    assert env == {K.CLOUD, K.BRIGHTNESS_CONTRAST, K.HAZE}
    assert geo == {K.ROTATE, K.SCALE, K.TRANSLATE}
    assert {k for k in K if k.is_geometric()} == geo
    assert len([k for k in K if k.category is Category.SENSOR]) == 6


@pytest.mark.parametrize("name,kind", [
    ("gaussian_noise", K.GAUSSIAN_NOISE),
    ("GaussianNoise".lower(), None),
    ("brightness", K.BRIGHTNESS_CONTRAST),
    ("compression", K.COMPRESSION),
    ("clouds", K.CLOUD),
    ("SALT_PEPPER", K.SALT_PEPPER),
    ("motion-blur", K.MOTION_BLUR),
])
def test_parse_names(name, kind):
    if kind is None:
        with pytest.raises(UnknownCorruption):
            K.parse(name)
    else:
        assert K.parse(name) is kind


def test_unknown_name_lists_valid_names():
    with pytest.raises(UnknownCorruption) as err:
        K.parse("fog")
    for k in K:
        assert k.value in str(err.value)


def test_severity_bounds():
    for kind in K:
        top = 9 if kind is K.HAZE else 5
        assert kind.max_severity == top
        severity_params(kind, top)
        for bad in (0, top + 1, -1):
            with pytest.raises(InvalidSeverity):
                severity_params(kind, bad)
    with pytest.raises(InvalidSeverity):
        severity_params(K.HAZE, 2.0)


def _severity_rank(kind, params):
    # Larger number = harsher, per kind.
    if kind is K.BRIGHTNESS_CONTRAST:
        return (params["brightness"], -params["contrast"])
    if kind is K.DATA_GAPS:
        return (params["num_gaps"], params["gap_width"])
    key, sign = {
        K.GAUSSIAN_NOISE: ("sigma", 1), K.SALT_PEPPER: ("amount", 1),
        K.GAUSSIAN_BLUR: ("kernel_size", 1), K.MOTION_BLUR: ("kernel_size", 1),
        K.CLOUD: ("threshold", -1), K.HAZE: ("intensity", 1),
        K.COMPRESSION: ("quality", -1), K.ROTATE: ("angle", 1),
        K.SCALE: ("ratio", -1), K.TRANSLATE: ("max_shift", 1),
    }[kind]
    return (sign * params[key],)


def test_schedules_are_monotone():
    for kind in K:
        ranks = [_severity_rank(kind, severity_params(kind, s))
                 for s in range(1, kind.max_severity + 1)]
        assert all(a < b for a, b in zip(ranks, ranks[1:])), kind


def test_severity_params_returns_copy():
    p = severity_params(K.GAUSSIAN_NOISE, 1)
    p["sigma"] = 9.0
    assert SEVERITY_TABLE[K.GAUSSIAN_NOISE][0]["sigma"] == 0.04


def test_spec_resolve_and_overrides():
    spec = CorruptionSpec(K.GAUSSIAN_NOISE, 3)
    assert spec.resolve() == {"sigma": 0.06}
    spec = CorruptionSpec("haze", 7, overrides={"intensity": 0.0})
    assert spec.kind is K.HAZE and spec.resolve() == {"intensity": 0.0}
    assert CorruptionSpec.parse("cloud:4").resolve() == {"threshold": 0.75}
    with pytest.raises(ValueError):
        CorruptionSpec(K.HAZE, 1, seed=-1)
    assert hash(CorruptionSpec(K.HAZE, 2)) == hash(CorruptionSpec(K.HAZE, 2))


def test_streams_keyed_and_order_independent():
    a1 = derive_stream(7, "img1", K.GAUSSIAN_NOISE, 3).random(8)
    derive_stream(7, "other", K.HAZE, 1).random(100)
    a2 = derive_stream(7, "img1", "gaussian_noise", 3).random(8)
    assert np.array_equal(a1, a2)
    for key in [(8, "img1", K.GAUSSIAN_NOISE, 3), (7, "img2", K.GAUSSIAN_NOISE, 3),
                (7, "img1", K.SALT_PEPPER, 3), (7, "img1", K.GAUSSIAN_NOISE, 4)]:
        assert not np.array_equal(a1, derive_stream(*key).random(8))


def test_raster_validation():
    r = ImageRaster(np.zeros((4, 5)))
    assert r.shape == (4, 5, 1) and r.width == 5 and r.height == 4 and r.channels == 1
    assert r.data.size == r.width * r.height * r.channels
    with pytest.raises(ValueError):
        ImageRaster(np.full((2, 2, 3), 1.5))
    with pytest.raises(ValueError):
        ImageRaster(np.full((2, 2, 3), np.nan))
    with pytest.raises(ValueError):
        r.data[0, 0, 0] = 1.0


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9), st.sampled_from([1, 3, 4])),
              elements=st.floats(0.0, 1.0)))
def test_png_round_trip_within_one_level(arr):
    r = ImageRaster(arr)
    with Image.open(io.BytesIO(encode_png(r))) as im:
        back = ImageRaster.from_uint8(np.asarray(im))
    assert back.shape == r.shape
    assert np.max(np.abs(back.data - r.data)) <= 0.5 / 255 + 1e-12


def test_uint8_round_trip_is_exact(tmp_path):
    arr = np.random.default_rng(0).integers(0, 256, (17, 23, 3)).astype(np.uint8)
    r = ImageRaster.from_uint8(arr)
    save_image(r, tmp_path / "a.png")
    assert np.array_equal(load_image(tmp_path / "a.png").to_uint8(), arr)


def test_jpeg_save_and_load(tmp_path):
    arr = np.full((16, 16, 3), 128, np.uint8)
    save_image(ImageRaster.from_uint8(arr), tmp_path / "a.jpg")
    back = load_image(tmp_path / "a.jpg")
    assert back.shape == (16, 16, 3)
    assert np.max(np.abs(back.to_uint8().astype(int) - 128)) <= 2


def test_decode_errors(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(DecodeError):
        load_image(bad)
    Image.new("RGB", (4, 4)).save(tmp_path / "x.bmp")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "x.bmp")
    with pytest.raises(UnsupportedFormat):
        save_image(ImageRaster(np.zeros((2, 2))), tmp_path / "x.tif")


def test_palette_and_gray_inputs(tmp_path):
    Image.new("P", (3, 3)).save(tmp_path / "p.png")
    assert load_image(tmp_path / "p.png").channels == 3
    Image.new("L", (3, 3), 255).save(tmp_path / "l.png")
    r = load_image(tmp_path / "l.png")
    assert r.channels == 1 and np.all(r.data == 1.0)
