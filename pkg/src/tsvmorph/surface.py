"""Surface height maps: raw binary format, PNG import, grayscale rendering.

The raw format is little-endian throughout: 4-byte magic ``WLI1``, u32 width,
u32 height, f32 pitch in micrometers per pixel, then width*height f32 height
samples in nanometers, row-major with the origin at the top-left.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import BadMagic, NonFiniteSample, TruncatedPayload, WrongSize, ZeroPitch

MAGIC = b"WLI1"
HEADER = struct.Struct("<4sIIf")


@dataclass(frozen=True)
class HeightMap:
    """2-D grid of surface heights (nm) with a lateral pixel pitch (um/px)."""

    width: int
    height: int
    pitch: float
    samples: np.ndarray  # float32, shape (height, width)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise TruncatedPayload(
                f"height map needs at least one sample, got {self.width}x{self.height}"
            )
        arr = np.ascontiguousarray(self.samples, dtype=np.float32)
        if arr.shape != (self.height, self.width):
            raise TruncatedPayload(
                f"expected {self.height}x{self.width} samples, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise NonFiniteSample("height samples must be finite")
        if not (self.pitch > 0) or not np.isfinite(np.float32(self.pitch)):
            raise ZeroPitch(f"pitch must be positive and finite, got {self.pitch}")
        object.__setattr__(self, "samples", arr)


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster."""

    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if arr.shape != (self.height, self.width):
            raise WrongSize(
                f"expected {self.height}x{self.width} pixels, got shape {arr.shape}"
            )
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "GrayImage":
        pixels = np.asarray(pixels)
        return cls(width=pixels.shape[1], height=pixels.shape[0], pixels=pixels)


def parse_wli(data: bytes) -> HeightMap:
    """Parse the raw binary surface format. Inverse of :func:`write_wli`."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {data[:4]!r}")
    if len(data) < HEADER.size:
        raise TruncatedPayload(f"header needs {HEADER.size} bytes, got {len(data)}")
    _, width, height, pitch = HEADER.unpack_from(data)
    expected = HEADER.size + 4 * width * height
    if len(data) != expected:
        raise TruncatedPayload(
            f"{width}x{height} grid needs {expected} bytes, got {len(data)}"
        )
    samples = np.frombuffer(data, dtype="<f4", count=width * height, offset=HEADER.size)
    if not np.isfinite(samples).all():
        raise NonFiniteSample("payload contains NaN or Inf samples")
    if not pitch > 0:
        raise ZeroPitch(f"pitch must be positive, got {pitch}")
    return HeightMap(width=width, height=height, pitch=pitch,
                     samples=samples.reshape(height, width))


def write_wli(hm: HeightMap) -> bytes:
    """Serialize a height map to the raw binary format, bit-exactly."""
    head = HEADER.pack(MAGIC, hm.width, hm.height, np.float32(hm.pitch))
    return head + hm.samples.astype("<f4", copy=False).tobytes()


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # numpy's round() is half-to-even; the format contract wants half away from zero
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def render_grayscale(hm: HeightMap) -> GrayImage:
    """Min-max normalize heights to 8-bit intensities; flat surfaces map to 128."""
    h = hm.samples.astype(np.float64)
    lo = h.min()
    hi = h.max()
    if hi == lo:
        pixels = np.full((hm.height, hm.width), 128, dtype=np.uint8)
    else:
        scaled = 255.0 * (h - lo) / (hi - lo)
        pixels = _round_half_away(scaled).astype(np.uint8)
    return GrayImage(width=hm.width, height=hm.height, pixels=pixels)


def read_png(data: bytes) -> GrayImage:
    """Import an 8-bit grayscale PNG; pixel values are used as intensities."""
    img = Image.open(io.BytesIO(data))
    if img.mode != "L":
        raise WrongSize(f"only 8-bit grayscale PNG is supported, got mode {img.mode!r}")
    pixels = np.asarray(img, dtype=np.uint8)
    return GrayImage(width=img.width, height=img.height, pixels=pixels)


def write_png(img: GrayImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()
