"""Cropping-session state with an on-disk mutation journal.

Crops are always regenerated deterministically from (image, grid); label
assignments are keyed by grid cell so they survive grid adjustments while the
cell (row, col) persists. Every mutation is appended to a JSONL journal next
to the session's PNG, so a crashed labeling session replays on restart.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..cropper import DEFAULT_THETA, GridSpec, crop_mosaic, estimate_grid
from ..errors import TsvMorphError
from ..manifest import CropRecord, MorphologyLabel, save_manifest
from ..surface import GrayImage, read_png

GRID_FIELDS = ("rows", "cols", "x_offset", "y_offset", "cell_width", "cell_height",
               "x_pitch", "y_pitch", "x_skew", "y_skew", "low_confidence")


class Session:
    def __init__(self, sid: str, name: str, image: GrayImage, grid: GridSpec,
                 theta: float = DEFAULT_THETA):
        self.id = sid
        self.name = name
        self.image = image
        self.grid = grid
        self.theta = theta
        # cell (row, col) -> (hard label, soft label or None)
        self.labels: dict[tuple[int, int], tuple[MorphologyLabel, tuple | None]] = {}
        self.lock = threading.Lock()
        self._crops: list[CropRecord] | None = None

    def crops(self) -> list[CropRecord]:
        if self._crops is None:
            self._crops = crop_mosaic(self.image, self.grid, theta=self.theta,
                                      source=self.name)
        out = []
        for rec in self._crops:
            assigned = self.labels.get(rec.grid_cell)
            if assigned:
                rec = rec.with_label(assigned[0], assigned[1])
            out.append(rec)
        return out

    def set_grid(self, grid: GridSpec):
        grid.validate_for(self.image)
        self.grid = grid
        self._crops = None  # labels persist per (row, col)

    def set_label(self, index: int, label: MorphologyLabel | None,
                  soft_label: tuple | None):
        base = self.crops()
        if not 0 <= index < len(base):
            raise KeyError(index)
        cell = base[index].grid_cell
        if soft_label is not None:
            label = MorphologyLabel.from_index(int(np.argmax(soft_label)))
        if label is None:
            self.labels.pop(cell, None)
        else:
            self.labels[cell] = (label, soft_label)


class SessionStore:
    def __init__(self, journal_dir: str | Path | None = None):
        self.journal_dir = Path(journal_dir) if journal_dir else None
        if self.journal_dir:
            self.journal_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        if self.journal_dir:
            self._replay()

    # journal plumbing

    def _journal_path(self, sid: str) -> Path:
        return self.journal_dir / f"{sid}.journal.jsonl"

    def _append(self, sid: str, event: dict):
        if not self.journal_dir:
            return
        with self._journal_path(sid).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def _replay(self):
        for journal in sorted(self.journal_dir.glob("*.journal.jsonl")):
            sid = journal.name.split(".")[0]
            png = self.journal_dir / f"{sid}.png"
            if not png.exists():
                continue
            session = None
            with journal.open(encoding="utf-8") as fh:
                for line in fh:
                    ev = json.loads(line)
                    if ev["event"] == "create":
                        image = read_png(png.read_bytes())
                        grid = GridSpec(**ev["grid"])
                        session = Session(sid, ev["name"], image, grid,
                                          theta=ev.get("theta", DEFAULT_THETA))
                    elif session and ev["event"] == "grid":
                        session.set_grid(GridSpec(**ev["grid"]))
                    elif session and ev["event"] == "label":
                        label = MorphologyLabel(ev["label"]) if ev.get("label") else None
                        soft = tuple(ev["soft_label"]) if ev.get("soft_label") else None
                        session.set_label(ev["index"], label, soft)
            if session:
                self.sessions[sid] = session

    # operations

    def create(self, name: str, png_bytes: bytes, rows: int, cols: int,
               theta: float = DEFAULT_THETA) -> Session:
        image = read_png(png_bytes)
        grid = estimate_grid(image, rows, cols, theta=theta)
        sid = uuid.uuid4().hex[:12]
        session = Session(sid, name, image, grid, theta=theta)
        with self.lock:
            self.sessions[sid] = session
        if self.journal_dir:
            (self.journal_dir / f"{sid}.png").write_bytes(png_bytes)
            self._append(sid, {"event": "create", "name": name, "theta": theta,
                               "grid": asdict(grid)})
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise KeyError(sid)
        return session

    def update_grid(self, sid: str, grid: GridSpec) -> Session:
        session = self.get(sid)
        with session.lock:
            session.set_grid(grid)
        self._append(sid, {"event": "grid", "grid": asdict(grid)})
        return session

    def set_label(self, sid: str, index: int, label: MorphologyLabel | None,
                  soft_label: tuple | None) -> Session:
        session = self.get(sid)
        with session.lock:
            session.set_label(index, label, soft_label)
        self._append(sid, {"event": "label", "index": index,
                           "label": label.value if label else None,
                           "soft_label": list(soft_label) if soft_label else None})
        return session

    def export(self, sid: str, out_dir: str | Path, partial: bool = False):
        session = self.get(sid)
        with session.lock:
            crops = session.crops()
            unlabeled = [r for r in crops if r.label is None]
            if unlabeled and not partial:
                raise TsvMorphError(f"{len(unlabeled)} crops are unlabeled")
            keep = [r for r in crops if r.label is not None]
            manifest_path = save_manifest(keep, Path(out_dir) / "manifest.jsonl")
        return manifest_path, len(keep), len(unlabeled)
