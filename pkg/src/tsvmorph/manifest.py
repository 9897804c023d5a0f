"""Dataset records and the JSON-lines manifest format.

Manifest rows look like::

    {"path": "crops/m_0_0.png", "label": "edge_ring", "soft_label": [0.1, 0.8, 0.1],
     "split": "train", "source_id": "m_0_0", "transform": "identity"}

``path`` is relative to the manifest file. ``label`` is one of
``granular | edge_ring | edge_bulge``; ``soft_label`` is optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import TsvMorphError, UnlabeledRecord
from .surface import GrayImage, read_png, write_png

SOFT_LABEL_TOL = 1e-6


class MorphologyLabel(Enum):
    GRANULAR = "granular"
    EDGE_RING = "edge_ring"
    EDGE_BULGE = "edge_bulge"

    @property
    def index(self) -> int:
        return list(MorphologyLabel).index(self)

    @classmethod
    def from_index(cls, i: int) -> "MorphologyLabel":
        return list(cls)[i]


LABELS = list(MorphologyLabel)
NUM_CLASSES = len(LABELS)


@dataclass
class CropRecord:
    """One 54x54 crop plus its labeling and provenance state."""

    image: GrayImage
    source_box: tuple[int, int, int, int] | None = None  # (x0, y0, x1, y1) half-open
    grid_cell: tuple[int, int] | None = None  # (row, col)
    label: MorphologyLabel | None = None
    soft_label: tuple[float, float, float] | None = None
    split: str = "train"
    source_id: str = ""
    transform: str = "identity"

    def __post_init__(self):
        if self.image.width != 54 or self.image.height != 54:
            raise TsvMorphError(
                f"crop must be 54x54, got {self.image.width}x{self.image.height}"
            )
        if self.soft_label is not None:
            sl = tuple(float(v) for v in self.soft_label)
            if len(sl) != NUM_CLASSES or any(v < 0 for v in sl):
                raise TsvMorphError(f"soft label must be 3 non-negative values: {sl}")
            if abs(sum(sl) - 1.0) > SOFT_LABEL_TOL:
                raise TsvMorphError(f"soft label must sum to 1 +- {SOFT_LABEL_TOL}: {sl}")
            if self.label is not None and self.label.index != int(np.argmax(sl)):
                raise TsvMorphError(
                    f"label {self.label.value} is not the argmax of soft label {sl}"
                )
            self.soft_label = sl

    def with_label(self, label: MorphologyLabel | None,
                   soft_label: tuple[float, float, float] | None = None) -> "CropRecord":
        if soft_label is not None and label is None:
            label = MorphologyLabel.from_index(int(np.argmax(soft_label)))
        return replace(self, label=label, soft_label=soft_label)


def save_manifest(records: list[CropRecord], manifest_path: str | Path,
                  image_dir: str | None = "crops") -> Path:
    """Write crop PNGs plus one JSONL row per record. Returns the manifest path."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    img_root = manifest_path.parent / image_dir if image_dir else manifest_path.parent
    img_root.mkdir(parents=True, exist_ok=True)

    with manifest_path.open("w", encoding="utf-8") as fh:
        for i, rec in enumerate(records):
            stem = rec.source_id or f"crop_{i:05d}"
            name = stem if rec.transform in ("", "identity") else f"{stem}__{rec.transform}"
            rel = (Path(image_dir) / f"{name}.png") if image_dir else Path(f"{name}.png")
            (manifest_path.parent / rel).write_bytes(write_png(rec.image))
            fh.write(json.dumps(_record_row(rec, rel.as_posix())) + "\n")
    return manifest_path


def _record_row(rec: CropRecord, path: str) -> dict:
    row = {
        "path": path,
        "label": rec.label.value if rec.label else None,
        "split": rec.split,
        "source_id": rec.source_id,
        "transform": rec.transform,
    }
    if rec.soft_label is not None:
        row["soft_label"] = list(rec.soft_label)
    if rec.source_box is not None:
        row["source_box"] = list(rec.source_box)
    if rec.grid_cell is not None:
        row["grid_cell"] = list(rec.grid_cell)
    return row


def load_manifest(manifest_path: str | Path) -> list[CropRecord]:
    """Read manifest rows and their referenced PNGs back into records."""
    manifest_path = Path(manifest_path)
    records = []
    with manifest_path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            img = read_png((manifest_path.parent / row["path"]).read_bytes())
            records.append(CropRecord(
                image=img,
                source_box=tuple(row["source_box"]) if row.get("source_box") else None,
                grid_cell=tuple(row["grid_cell"]) if row.get("grid_cell") else None,
                label=MorphologyLabel(row["label"]) if row.get("label") else None,
                soft_label=tuple(row["soft_label"]) if row.get("soft_label") else None,
                split=row.get("split", "train"),
                source_id=row.get("source_id", ""),
                transform=row.get("transform", "identity"),
            ))
    return records


def require_labeled(records: list[CropRecord]) -> None:
    for i, rec in enumerate(records):
        if rec.label is None:
            raise UnlabeledRecord(f"record {i} ({rec.source_id!r}) has no label")
