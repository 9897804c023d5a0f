import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsvmorph.errors import BadMagic, NonFiniteSample, TruncatedPayload, WrongSize, ZeroPitch
from tsvmorph.surface import (
    GrayImage,
    HeightMap,
    parse_wli,
    read_png,
    render_grayscale,
    write_png,
    write_wli,
)


def make_map(width, height, pitch, values):
    return HeightMap(width=width, height=height, pitch=pitch,
                     samples=np.array(values, dtype=np.float32).reshape(height, width))


def test_parse_minimal_file():
    hm = make_map(2, 2, 0.2, [0, 1, 2, 3])
    parsed = parse_wli(write_wli(hm))
    assert (parsed.width, parsed.height) == (2, 2)
    assert parsed.pitch == pytest.approx(0.2)
    assert np.array_equal(parsed.samples, hm.samples)


def test_single_sample_file_is_20_bytes():
    data = write_wli(make_map(1, 1, 1.0, [5.0]))
    assert len(data) == 20  # 16-byte header + one f32 sample


def test_truncated_payload():
    data = write_wli(make_map(2, 2, 0.2, [0, 1, 2, 3]))
    with pytest.raises(TruncatedPayload):
        parse_wli(data[:-4])  # 3 of 4 samples


def test_bad_magic():
    data = write_wli(make_map(1, 1, 1.0, [5.0]))
    with pytest.raises(BadMagic):
        parse_wli(b"XXXX" + data[4:])


def test_nonfinite_sample_rejected():
    good = write_wli(make_map(1, 1, 1.0, [5.0]))
    bad = good[:16] + np.array([np.nan], dtype="<f4").tobytes()
    with pytest.raises(NonFiniteSample):
        parse_wli(bad)
    with pytest.raises(NonFiniteSample):
        make_map(1, 1, 1.0, [np.inf])


def test_zero_pitch_rejected():
    good = write_wli(make_map(1, 1, 1.0, [5.0]))
    bad = good[:12] + np.array([0.0], dtype="<f4").tobytes() + good[16:]
    with pytest.raises(ZeroPitch):
        parse_wli(bad)
    with pytest.raises(ZeroPitch):
        make_map(1, 1, -2.0, [5.0])


def random_heightmap(seed):
    rng = np.random.default_rng(seed)
    w = int(rng.integers(1, 20))
    h = int(rng.integers(1, 20))
    pitch = float(np.float32(rng.uniform(0.01, 5.0)))
    samples = rng.normal(0, 100, (h, w)).astype(np.float32)
    return HeightMap(width=w, height=h, pitch=pitch, samples=samples)


def test_write_parse_roundtrip_100_random_files():
    for seed in range(100):
        hm = random_heightmap(seed)
        data = write_wli(hm)
        assert write_wli(parse_wli(data)) == data


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_parse_write_identity(seed):
    hm = random_heightmap(seed)
    back = parse_wli(write_wli(hm))
    assert np.array_equal(back.samples, hm.samples)
    assert np.float32(back.pitch) == np.float32(hm.pitch)


def test_render_endpoints():
    img = render_grayscale(make_map(2, 1, 1.0, [0, 100]))
    assert img.pixels.tolist() == [[0, 255]]


def test_render_flat_surface_is_mid_gray():
    img = render_grayscale(make_map(2, 2, 1.0, [7, 7, 7, 7]))
    assert (img.pixels == 128).all()


def test_render_rounds_half_away_from_zero():
    img = render_grayscale(make_map(3, 1, 1.0, [0, 50, 100]))
    assert img.pixels.tolist() == [[0, 128, 255]]


def test_render_monotone():
    rng = np.random.default_rng(3)
    h = rng.normal(0, 50, (9, 9)).astype(np.float32)
    img = render_grayscale(HeightMap(9, 9, 1.0, h))
    order = np.argsort(h.ravel())
    px = img.pixels.ravel()[order]
    assert (np.diff(px.astype(int)) >= 0).all()


@given(st.integers(0, 5000), st.sampled_from([0.5, 1.0, 2.0, 3.0, 10.0]),
       st.integers(-10**6, 10**6))
@settings(max_examples=80, deadline=None)
def test_render_invariant_under_positive_affine_height_maps(seed, a, b):
    rng = np.random.default_rng(seed)
    h = rng.integers(-10_000, 10_000, (7, 7)).astype(np.float32)
    base = render_grayscale(HeightMap(7, 7, 1.0, h))
    mapped = render_grayscale(HeightMap(7, 7, 1.0, (a * h + b).astype(np.float32)))
    assert np.array_equal(base.pixels, mapped.pixels)


def test_png_roundtrip():
    rng = np.random.default_rng(5)
    img = GrayImage.from_array(rng.integers(0, 256, (13, 9), dtype=np.uint8))
    back = read_png(write_png(img))
    assert np.array_equal(back.pixels, img.pixels)
    assert (back.width, back.height) == (9, 13)


def test_png_rejects_non_grayscale():
    import io
    from PIL import Image
    buf = io.BytesIO()
    Image.new("RGB", (4, 4)).save(buf, format="PNG")
    with pytest.raises(WrongSize):
        read_png(buf.getvalue())


def test_empty_heightmap_unconstructible():
    with pytest.raises(TruncatedPayload):
        HeightMap(width=0, height=0, pitch=1.0,
                  samples=np.zeros((0, 0), dtype=np.float32))
    # and a zero-dimension header cannot parse either
    import struct
    data = b"WLI1" + struct.pack("<IIf", 0, 0, 1.0)
    with pytest.raises(TruncatedPayload):
        parse_wli(data)
