"""Grid-based segmentation of mosaic images into centered 54x54 via crops.

The workflow mirrors an interactive batch cropper: estimate a uniform grid of
cells from intensity profiles, refine a tight bounding box inside each cell by
scanning for average-grayscale change, then center each box on a 54x54 canvas.
All knobs (offsets, pitch, skew, threshold) stay user-adjustable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoxTooLarge, ImageTooSmall, TsvMorphError
from .manifest import CropRecord
from .surface import GrayImage

CROP_SIZE = 54
DEFAULT_THETA = 12.0
CELL_MARGIN = 2  # px added around detected signal intervals when fitting cells

Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell lattice: cell (r, c) starts at offset + index * pitch,
    with optional per-cell drift (skew) along the other axis."""

    rows: int
    cols: int
    x_offset: int = 0
    y_offset: int = 0
    cell_width: int = CROP_SIZE
    cell_height: int = CROP_SIZE
    x_pitch: int = CROP_SIZE
    y_pitch: int = CROP_SIZE
    x_skew: int = 0
    y_skew: int = 0
    low_confidence: bool = False

    def cell(self, row: int, col: int) -> Box:
        x0 = self.x_offset + col * self.x_pitch + row * self.x_skew
        y0 = self.y_offset + row * self.y_pitch + col * self.y_skew
        return (x0, y0, x0 + self.cell_width, y0 + self.cell_height)

    def cells(self):
        for r in range(self.rows):
            for c in range(self.cols):
                yield (r, c, self.cell(r, c))

    def validate_for(self, img: GrayImage) -> "GridSpec":
        if self.rows < 1 or self.cols < 1:
            raise TsvMorphError("grid needs at least one row and one column")
        if self.cell_width < 8 or self.cell_height < 8:
            raise TsvMorphError("grid cells must be at least 8x8 px")
        for r, c, (x0, y0, x1, y1) in self.cells():
            if x0 < 0 or y0 < 0 or x1 > img.width or y1 > img.height:
                raise TsvMorphError(
                    f"cell ({r},{c}) box ({x0},{y0},{x1},{y1}) exceeds "
                    f"{img.width}x{img.height} image")
        return self


def background_estimate(img: GrayImage) -> int:
    """Mode intensity of the four 5x5 corner patches."""
    px = img.pixels
    corners = np.concatenate([
        px[:5, :5].ravel(), px[:5, -5:].ravel(),
        px[-5:, :5].ravel(), px[-5:, -5:].ravel(),
    ])
    return int(np.bincount(corners, minlength=256).argmax())


MERGE_GAP = 16  # low runs narrower than this cannot separate two vias
MIN_INTERVAL = 4  # signal runs narrower than this are profile blips, not vias


def _signal_intervals(profile: np.ndarray, background: float, theta: float):
    """Maximal runs not covered by a length>=2 run of near-background means.

    Narrow low runs inside a via (quiet columns between bumps) are merged
    away; only gaps of MERGE_GAP px or more separate neighboring vias.
    """
    low = np.abs(profile - background) < theta
    n = len(low)
    # positions belonging to an extended (>= 2 px) low run
    in_gap = np.zeros(n, dtype=bool)
    i = 0
    while i < n:
        if low[i]:
            j = i
            while j < n and low[j]:
                j += 1
            if j - i >= 2:
                in_gap[i:j] = True
            i = j
        else:
            i += 1
    intervals = []
    i = 0
    while i < n:
        if not in_gap[i]:
            j = i
            while j < n and not in_gap[j]:
                j += 1
            intervals.append([i, j])
            i = j
        else:
            i += 1
    merged = []
    for iv in intervals:
        if merged and iv[0] - merged[-1][1] < MERGE_GAP:
            merged[-1][1] = iv[1]
        else:
            merged.append(iv)
    return [tuple(iv) for iv in merged if iv[1] - iv[0] >= MIN_INTERVAL]


def _fit_axis(intervals, count: int, extent: int):
    """Best-fit (offset, pitch, size) covering the detected intervals."""
    centers = np.array([(a + b) / 2.0 for a, b in intervals])
    widths = np.array([b - a for a, b in intervals], dtype=float)
    size = int(round(widths.max())) + 2 * CELL_MARGIN
    if count >= 2:
        # least-squares line through (index, center)
        idx = np.arange(count)
        pitch = float(np.polyfit(idx, centers, 1)[0])
        first_center = float(centers.mean() - pitch * idx.mean())
    else:
        pitch = float(extent)
        first_center = float(centers[0])
    offset = int(round(first_center - size / 2.0))
    pitch_i = max(int(round(pitch)), 1)
    # clamp so every cell stays within the image
    size = min(size, extent)
    offset = min(max(offset, 0), extent - size)
    if count >= 2:
        last_end = offset + (count - 1) * pitch_i + size
        if last_end > extent:
            pitch_i = (extent - size - offset) // (count - 1)
    return offset, pitch_i, size


def estimate_grid(img: GrayImage, rows: int, cols: int,
                  theta: float = DEFAULT_THETA) -> GridSpec:
    """Initialize a uniform grid from row/column mean-intensity profiles.

    Cell boundaries come from extended near-background runs in the profiles;
    if an axis does not show the expected number of signal runs the grid
    falls back to a uniform partition and is flagged low-confidence.
    """
    if img.width < 8 or img.height < 8:
        raise ImageTooSmall(f"need at least 8x8, got {img.width}x{img.height}")
    if rows < 1 or cols < 1:
        raise TsvMorphError("rows and cols must be at least 1")

    bg = background_estimate(img)
    px = img.pixels.astype(np.float64)
    col_profile = px.mean(axis=0)
    row_profile = px.mean(axis=1)
    # profiles dim with mosaic size and vary several-fold between classes, so
    # adapt the run threshold to the strongest deviation seen, capped by the
    # user threshold
    max_dev = max(np.abs(col_profile - bg).max(), np.abs(row_profile - bg).max())
    run_theta = float(np.clip(0.1 * max_dev, 2.0, theta))
    col_runs = _signal_intervals(col_profile, bg, run_theta)
    row_runs = _signal_intervals(row_profile, bg, run_theta)

    fallback = len(col_runs) != cols or len(row_runs) != rows
    if fallback:
        x_pitch = img.width // cols
        y_pitch = img.height // rows
        return GridSpec(rows=rows, cols=cols, x_offset=0, y_offset=0,
                        cell_width=x_pitch, cell_height=y_pitch,
                        x_pitch=x_pitch, y_pitch=y_pitch,
                        low_confidence=True).validate_for(img)

    x_offset, x_pitch, cell_w = _fit_axis(col_runs, cols, img.width)
    y_offset, y_pitch, cell_h = _fit_axis(row_runs, rows, img.height)
    return GridSpec(rows=rows, cols=cols, x_offset=x_offset, y_offset=y_offset,
                    cell_width=cell_w, cell_height=cell_h,
                    x_pitch=x_pitch, y_pitch=y_pitch).validate_for(img)


def detect_box_in_cell(img: GrayImage, cell: Box, theta: float = DEFAULT_THETA,
                       background: float | None = None) -> Box:
    """Tightest box whose edge scanlines deviate from background by > theta.

    Scans inward from all four cell edges; an axis with no deviating scanline
    keeps the full cell extent. Follow-up passes re-average scanlines over the
    previous box +- 2 px until the box is stable, so box edges do not depend
    on how much quiet margin the cell happens to include.
    """
    x0, y0, x1, y1 = cell
    if x0 < 0 or y0 < 0 or x1 > img.width or y1 > img.height or x0 >= x1 or y0 >= y1:
        raise TsvMorphError(f"cell {cell} not within {img.width}x{img.height} image")
    bg = background_estimate(img) if background is None else background
    patch = img.pixels[y0:y1, x0:x1].astype(np.float64)
    h, w = patch.shape

    def axis_extent(profile, full):
        dev = np.abs(profile - bg) > theta
        if not dev.any():
            return full
        a = int(np.argmax(dev))
        b = len(dev) - int(np.argmax(dev[::-1]))
        return a, b

    bx0, bx1 = axis_extent(patch.mean(axis=0), (0, w))
    by0, by1 = axis_extent(patch.mean(axis=1), (0, h))
    for _ in range(6):
        ys = slice(max(by0 - 2, 0), min(by1 + 2, h))
        xs = slice(max(bx0 - 2, 0), min(bx1 + 2, w))
        nx0, nx1 = axis_extent(patch[ys, :].mean(axis=0), (0, w))
        ny0, ny1 = axis_extent(patch[:, xs].mean(axis=1), (0, h))
        if (nx0, ny0, nx1, ny1) == (bx0, by0, bx1, by1):
            break
        bx0, by0, bx1, by1 = nx0, ny0, nx1, ny1
    return (x0 + bx0, y0 + by0, x0 + bx1, y0 + by1)


def crop_centered(img: GrayImage, box: Box,
                  background: float | None = None) -> GrayImage:
    """Center the box content on a 54x54 canvas, padding with the background.

    Odd padding remainders go to the right/bottom edge.
    """
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    if w > CROP_SIZE or h > CROP_SIZE:
        raise BoxTooLarge(f"box {w}x{h} exceeds {CROP_SIZE}x{CROP_SIZE}")
    if x0 < 0 or y0 < 0 or x1 > img.width or y1 > img.height or w <= 0 or h <= 0:
        raise TsvMorphError(f"box {box} not within {img.width}x{img.height} image")
    bg = background_estimate(img) if background is None else background
    canvas = np.full((CROP_SIZE, CROP_SIZE), int(bg), dtype=np.uint8)
    left = (CROP_SIZE - w) // 2
    top = (CROP_SIZE - h) // 2
    canvas[top:top + h, left:left + w] = img.pixels[y0:y1, x0:x1]
    return GrayImage(width=CROP_SIZE, height=CROP_SIZE, pixels=canvas)


def crop_mosaic(img: GrayImage, grid: GridSpec, theta: float = DEFAULT_THETA,
                source: str = "mosaic") -> list[CropRecord]:
    """One unlabeled CropRecord per grid cell, in row-major cell order."""
    grid.validate_for(img)
    bg = background_estimate(img)
    records = []
    for r, c, cell in grid.cells():
        box = detect_box_in_cell(img, cell, theta=theta, background=bg)
        crop = crop_centered(img, box, background=bg)
        records.append(CropRecord(image=crop, source_box=box, grid_cell=(r, c),
                                  source_id=f"{source}_{r}_{c}"))
    return records


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two half-open pixel boxes."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(ix1 - ix0, 0) * max(iy1 - iy0, 0)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0
