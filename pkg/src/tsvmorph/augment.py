"""Label-preserving geometric augmentation: rotations and axis flips.

Six fixed regimes multiply a labeled set by 1/3/4/6/8/10. Flips apply to the
originals only, never to rotated copies; that composition rule is the one
consistent with all six multipliers. 90-degree-multiple rotations and flips
are exact pixel permutations; 45-degree-family rotations use bilinear
resampling about the image center with border-median fill.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import WrongSize
from .manifest import CropRecord, require_labeled
from .surface import GrayImage

SIZE = 54


class Transform(Enum):
    IDENTITY = "identity"
    ROT45 = "rot45"
    ROT90 = "rot90"
    ROT135 = "rot135"
    ROT180 = "rot180"
    ROT225 = "rot225"
    ROT270 = "rot270"
    ROT315 = "rot315"
    FLIP_H = "flip_h"
    FLIP_V = "flip_v"

    @property
    def degrees(self) -> int | None:
        return int(self.value[3:]) if self.value.startswith("rot") else None


_ROT90S = {Transform.ROT90: 1, Transform.ROT180: 2, Transform.ROT270: 3}


@dataclass(frozen=True)
class AugmentationType:
    id: int
    transforms: tuple[Transform, ...]

    @property
    def multiplier(self) -> int:
        return len(self.transforms)


_ROTS_90 = (Transform.ROT90, Transform.ROT180, Transform.ROT270)
_ROTS_45 = (Transform.ROT45, Transform.ROT90, Transform.ROT135, Transform.ROT180,
            Transform.ROT225, Transform.ROT270, Transform.ROT315)
_FLIPS = (Transform.FLIP_H, Transform.FLIP_V)

AUGMENTATION_TYPES = {
    0: AugmentationType(0, (Transform.IDENTITY,)),
    1: AugmentationType(1, (Transform.IDENTITY,) + _FLIPS),
    2: AugmentationType(2, (Transform.IDENTITY,) + _ROTS_90),
    3: AugmentationType(3, (Transform.IDENTITY,) + _ROTS_90 + _FLIPS),
    4: AugmentationType(4, (Transform.IDENTITY,) + _ROTS_45),
    5: AugmentationType(5, (Transform.IDENTITY,) + _ROTS_45 + _FLIPS),
}

MULTIPLIERS = {t: aug.multiplier for t, aug in AUGMENTATION_TYPES.items()}  # 1,3,4,6,8,10


def _rotate_bilinear(px: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center; out-of-source pixels take the border median."""
    n = px.shape[0]
    border = np.concatenate([px[0, :], px[-1, :], px[1:-1, 0], px[1:-1, -1]])
    fill = float(np.median(border))
    c = (n - 1) / 2.0
    # map each destination pixel back into the source frame
    ang = math.radians(degrees)
    cos_a, sin_a = math.cos(ang), math.sin(ang)
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    dx, dy = xx - c, yy - c
    sx = cos_a * dx + sin_a * dy + c
    sy = -sin_a * dx + cos_a * dy + c

    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros((n, n))
    src = px.astype(np.float64)
    for oy, ox, w in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)),
                      (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        xs = x0 + ox
        ys = y0 + oy
        inside = (xs >= 0) & (xs < n) & (ys >= 0) & (ys < n)
        vals = np.where(inside, src[np.clip(ys, 0, n - 1), np.clip(xs, 0, n - 1)], fill)
        out += w * vals
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def apply(t: Transform, img: GrayImage) -> GrayImage:
    """Apply one transform to a 54x54 image; output is always 54x54."""
    if img.width != SIZE or img.height != SIZE:
        raise WrongSize(f"augmentation expects {SIZE}x{SIZE}, got {img.width}x{img.height}")
    px = img.pixels
    if t is Transform.IDENTITY:
        out = px.copy()
    elif t is Transform.FLIP_H:
        out = px[:, ::-1].copy()
    elif t is Transform.FLIP_V:
        out = px[::-1, :].copy()
    elif t in _ROT90S:
        out = np.rot90(px, k=_ROT90S[t]).copy()
    else:
        out = _rotate_bilinear(px, t.degrees)
    return GrayImage(width=SIZE, height=SIZE, pixels=out)


def augment_records(records: list[CropRecord], aug: AugmentationType | int) -> list[CropRecord]:
    """Expand labeled records by the regime's transform list.

    Output order is source order, then transform order; every output keeps its
    source's label and records the transform it came from.
    """
    if isinstance(aug, int):
        aug = AUGMENTATION_TYPES[aug]
    require_labeled(records)
    out = []
    for rec in records:
        for t in aug.transforms:
            if t is Transform.IDENTITY:
                out.append(replace(rec, transform=Transform.IDENTITY.value))
            else:
                out.append(replace(rec, image=apply(t, rec.image), transform=t.value))
    return out


# spec name used by the pipeline surface; records must already be labeled
augment_manifest = augment_records
