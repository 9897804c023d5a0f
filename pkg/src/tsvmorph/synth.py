"""Procedural generation of single-via height maps and multi-via mosaics.

Each of the three morphology classes gets a distinct surface construction on
top of a flat background, confined to the via disk:

* granular     - band-limited undulation over the whole disk, comparable
                 roughness at the rim and in the interior;
* edge_ring    - a mostly-continuous Gaussian ridge along the rim circle plus
                 low-level interior noise;
* edge_bulge   - a few discrete Gaussian bumps on the rim circle, angularly
                 separated so they cannot merge into a ring.

Everything is a pure function of (label, params); the seed lives in
:class:`GenParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParams, LabelCountMismatch
from .manifest import MorphologyLabel
from .surface import HeightMap, _round_half_away

# bump footprint for the edge_bulge class (px); kept module-level because the
# class geometry, not the user, fixes what "discrete bump" means
BUMP_SIGMA = 2.5

# fraction of the rim circle left uncovered by an edge_ring ridge
RING_GAP_RANGE = (0.04, 0.10)

DEFAULT_PITCH = 0.2  # um/px; a 5.5 um via then spans ~28 px in a 54 px frame


@dataclass(frozen=True)
class GenParams:
    frame: int = 54
    via_radius: float = 14.0
    ring_sigma: float = 1.5
    bump_count_range: tuple[int, int] = (2, 5)
    amplitude: float = 100.0  # nm
    noise_amplitude: float = 40.0  # nm
    background_level: float = 0.0  # nm
    seed: int = 0
    pitch: float = DEFAULT_PITCH

    def validate(self) -> "GenParams":
        lo, hi = self.bump_count_range
        if not self.via_radius < self.frame / 2:
            raise InvalidParams("via_radius must be smaller than half the frame")
        if not self.amplitude > 0:
            raise InvalidParams("amplitude must be positive")
        if not (1 <= lo <= hi <= 12):
            raise InvalidParams("bump_count_range must lie within [1, 12]")
        if self.frame < 8:
            raise InvalidParams("frame must be at least 8 px")
        return self


@dataclass(frozen=True)
class Mosaic:
    heightmap: HeightMap
    # (row, col, x0, y0, x1, y1, label) with half-open pixel boxes
    boxes: list[tuple[int, int, int, int, int, int, MorphologyLabel]]


def _grid(frame: float | int):
    c = (frame - 1) / 2.0
    yy, xx = np.mgrid[0:frame, 0:frame].astype(np.float64)
    r = np.hypot(xx - c, yy - c)
    theta = np.arctan2(yy - c, xx - c)
    return r, theta


def _band_noise(frame: int, rng: np.random.Generator, n_waves: int = 20) -> np.ndarray:
    """Sum of random-phase plane sinusoids with wavelengths 4-12 px, zero mean."""
    yy, xx = np.mgrid[0:frame, 0:frame].astype(np.float64)
    out = np.zeros((frame, frame))
    for _ in range(n_waves):
        lam = rng.uniform(4.0, 12.0)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        kx = math.cos(ang) * 2.0 * math.pi / lam
        ky = math.sin(ang) * 2.0 * math.pi / lam
        out += np.sin(kx * xx + ky * yy + phase)
    return out


def _scaled_noise(frame, disk, rng, target_rms):
    """Band noise rescaled so its std over the disk equals target_rms."""
    n = _band_noise(frame, rng)
    sd = n[disk].std()
    if sd == 0:
        return np.zeros_like(n)
    return n * (target_rms / sd)


def _min_circular_gap(angles: np.ndarray) -> float:
    a = np.sort(angles)
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * math.pi]]))
    return float(gaps.min())


def _bump_angles(k: int, rng: np.random.Generator) -> np.ndarray:
    """k rim angles with pairwise circular separation >= pi/k."""
    min_sep = 2.0 * math.pi / (2 * k)
    for _ in range(1000):
        ang = rng.uniform(0.0, 2.0 * math.pi, size=k)
        if k == 1 or _min_circular_gap(ang) >= min_sep:
            return ang
    # evenly spaced with a small jitter always satisfies the separation
    base = np.arange(k) * 2.0 * math.pi / k + rng.uniform(0.0, 2.0 * math.pi)
    jitter = rng.uniform(-min_sep / 4, min_sep / 4, size=k)
    return (base + jitter) % (2.0 * math.pi)


def generate_via(label: MorphologyLabel, p: GenParams) -> HeightMap:
    """Generate one via tile of shape (frame, frame), deterministic in (label, p)."""
    p.validate()
    rng = np.random.default_rng(np.random.SeedSequence((p.seed & 0xFFFFFFFFFFFFFFFF,
                                                        label.index)))
    r, theta = _grid(p.frame)
    disk = r <= p.via_radius
    rim_radius = p.via_radius - 2.0

    h = np.zeros((p.frame, p.frame))
    if label is MorphologyLabel.GRANULAR:
        rough = _scaled_noise(p.frame, disk, rng, p.noise_amplitude)
        h[disk] = 2.5 * p.noise_amplitude + rough[disk]
    elif label is MorphologyLabel.EDGE_RING:
        gap_frac = rng.uniform(*RING_GAP_RANGE)
        gap_center = rng.uniform(0.0, 2.0 * math.pi)
        half_gap = gap_frac * math.pi  # half-angle of the uncovered arc
        # angular distance from the gap center, in [0, pi]
        d = np.abs((theta - gap_center + math.pi) % (2.0 * math.pi) - math.pi)
        soft = 0.05 * math.pi  # edge softening of the gap
        cover = np.clip((d - half_gap) / soft, 0.0, 1.0)
        ridge = p.amplitude * np.exp(-((r - rim_radius) ** 2) / (2 * p.ring_sigma**2))
        interior = np.maximum(_scaled_noise(p.frame, disk, rng, p.amplitude / 12), 0.0)
        h[disk] = (ridge * cover + interior)[disk]
    elif label is MorphologyLabel.EDGE_BULGE:
        lo, hi = p.bump_count_range
        k = int(rng.integers(lo, hi + 1))
        angles = _bump_angles(k, rng)
        c = (p.frame - 1) / 2.0
        yy, xx = np.mgrid[0:p.frame, 0:p.frame].astype(np.float64)
        bumps = np.zeros((p.frame, p.frame))
        for a in angles:
            bx = c + rim_radius * math.cos(a)
            by = c + rim_radius * math.sin(a)
            bumps = np.maximum(
                bumps,
                p.amplitude * np.exp(-((xx - bx) ** 2 + (yy - by) ** 2)
                                     / (2 * BUMP_SIGMA**2)),
            )
        interior = np.maximum(_scaled_noise(p.frame, disk, rng, p.amplitude / 12), 0.0)
        h[disk] = (bumps + interior)[disk]
    else:  # pragma: no cover
        raise InvalidParams(f"unknown label {label}")

    h = np.clip(h, 0.0, 4.0 * p.amplitude) + p.background_level
    return HeightMap(width=p.frame, height=p.frame, pitch=p.pitch,
                     samples=h.astype(np.float32))


def signal_box(tile: np.ndarray, p: GenParams, lo: float, hi: float,
               theta: float = 12.0) -> tuple[int, int, int, int]:
    """Half-open box of the via signal as an ideal scanline detector sees it.

    ``lo``/``hi`` set the intensity scale of the image the tile will be
    rendered into; the box edge sits where mean intensity along a scanline
    first deviates from the background by more than theta. Scanline means are
    taken over the via disk extent +- 2 px, the support a fitted grid cell
    provides.
    """
    if hi <= lo:
        return (0, 0, tile.shape[1], tile.shape[0])
    # quantize exactly like the grayscale renderer so box edges match what a
    # detector sees on the rendered mosaic
    inten = _round_half_away(255.0 * (tile.astype(np.float64) - lo) / (hi - lo))
    bg = float(_round_half_away(
        np.float64(255.0 * (p.background_level - lo) / (hi - lo))))
    n = tile.shape[0]
    c = (n - 1) / 2.0
    support = slice(max(int(math.floor(c - p.via_radius)) - 2, 0),
                    min(int(math.ceil(c + p.via_radius)) + 3, n))

    def axis_extent(mean_profile):
        dev = np.abs(mean_profile - bg) > theta
        if not dev.any():
            return 0, len(mean_profile)
        a = int(np.argmax(dev))
        b = len(dev) - int(np.argmax(dev[::-1]))
        return a, b

    x0, x1 = axis_extent(inten[support, :].mean(axis=0))
    y0, y1 = axis_extent(inten[:, support].mean(axis=1))
    # refine over the current box +- 2 px until stable; the detector applies
    # the same refinement within its cell, so both converge to one answer
    for _ in range(6):
        ys = slice(max(y0 - 2, 0), min(y1 + 2, n))
        xs = slice(max(x0 - 2, 0), min(x1 + 2, n))
        nx0, nx1 = axis_extent(inten[ys, :].mean(axis=0))
        ny0, ny1 = axis_extent(inten[:, xs].mean(axis=1))
        if (nx0, ny0, nx1, ny1) == (x0, y0, x1, y1):
            break
        x0, y0, x1, y1 = nx0, ny0, nx1, ny1
    return (x0, y0, x1, y1)


def rim_statistics(hm: HeightMap, p: GenParams) -> tuple[float, float]:
    """(rim-to-interior mean-height ratio, rim angular coverage).

    The ratio compares mean height above background over the rim annulus
    (rim radius +- 2*ring_sigma) against the interior disk of radius
    via_radius/2; coverage is the fraction of 5-degree rim bins whose peak
    exceeds amplitude/2. Together these separate the three classes.
    """
    r, theta = _grid(p.frame)
    rel = hm.samples.astype(np.float64) - p.background_level
    rim_radius = p.via_radius - 2.0
    annulus = np.abs(r - rim_radius) <= 2.0 * p.ring_sigma
    interior = r <= p.via_radius / 2.0
    rim_mean = rel[annulus].mean()
    int_mean = rel[interior].mean()
    ratio = rim_mean / max(int_mean, 1e-9)

    nbins = 72
    bins = ((theta + math.pi) / (2 * math.pi) * nbins).astype(int) % nbins
    covered = 0
    for b in range(nbins):
        sel = annulus & (bins == b)
        if sel.any() and rel[sel].max() > p.amplitude / 2.0:
            covered += 1
    return float(ratio), covered / nbins


def classify_by_statistics(hm: HeightMap, p: GenParams) -> MorphologyLabel:
    """Rule-based reference classifier used to sanity-check class separability.

    Granular surfaces have comparable rim and interior height (ratio near 1);
    edge classes concentrate height at the rim, and the ring covers most of
    the circumference while bulges cannot.
    """
    ratio, coverage = rim_statistics(hm, p)
    if ratio < 1.5:
        return MorphologyLabel.GRANULAR
    if coverage >= 0.6:
        return MorphologyLabel.EDGE_RING
    return MorphologyLabel.EDGE_BULGE


def generate_mosaic(rows: int, cols: int, labels: list[MorphologyLabel],
                    p: GenParams, gap: int = 6) -> Mosaic:
    """Lay vias on a regular grid with flat background margins of width gap."""
    p.validate()
    if len(labels) != rows * cols:
        raise LabelCountMismatch(f"need {rows * cols} labels, got {len(labels)}")
    if gap < 2:
        raise InvalidParams("gap must be at least 2 px")

    width = cols * p.frame + (cols + 1) * gap
    height = rows * p.frame + (rows + 1) * gap
    canvas = np.full((height, width), p.background_level, dtype=np.float32)
    tiles = {}
    for rr in range(rows):
        for cc in range(cols):
            label = labels[rr * cols + cc]
            cell_seed = np.random.SeedSequence(
                (p.seed & 0xFFFFFFFFFFFFFFFF, rr, cc)).generate_state(1)[0]
            tile = generate_via(label, replace(p, seed=int(cell_seed)))
            x0 = gap + cc * (p.frame + gap)
            y0 = gap + rr * (p.frame + gap)
            canvas[y0:y0 + p.frame, x0:x0 + p.frame] = tile.samples
            tiles[(rr, cc)] = (tile, label, x0, y0)

    # truth boxes use the intensity scale of the whole rendered mosaic
    lo = float(canvas.min())
    hi = float(canvas.max())
    boxes = []
    for rr in range(rows):
        for cc in range(cols):
            tile, label, x0, y0 = tiles[(rr, cc)]
            bx0, by0, bx1, by1 = signal_box(tile.samples, p, lo, hi)
            boxes.append((rr, cc, x0 + bx0, y0 + by0, x0 + bx1, y0 + by1, label))

    hm = HeightMap(width=width, height=height, pitch=p.pitch, samples=canvas)
    return Mosaic(heightmap=hm, boxes=boxes)
