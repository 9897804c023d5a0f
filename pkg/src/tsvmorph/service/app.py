"""HTTP/JSON service exposing cropping sessions and labeling state.

GET endpoints never mutate; mutations are atomic per session and journaled.
Static files for the browser labeling app are served from /ui when a
frontend build directory is available.
"""

from __future__ import annotations

import base64
import binascii
import os
from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles

from ..cropper import GridSpec
from ..errors import TsvMorphError
from ..manifest import MorphologyLabel, SOFT_LABEL_TOL
from ..surface import write_png
from .schemas import (
    CreateSessionRequest,
    CropInfo,
    ExportRequest,
    ExportResponse,
    GridModel,
    LabelRequest,
    SessionDetail,
    SessionSummary,
)
from .store import Session, SessionStore

DEFAULT_FRONTEND = Path(__file__).resolve().parents[3] / "frontend" / "dist"


def _grid_model(grid: GridSpec) -> GridModel:
    return GridModel(**asdict(grid))


def _crop_infos(session: Session) -> list[CropInfo]:
    return [
        CropInfo(index=i, row=rec.grid_cell[0], col=rec.grid_cell[1],
                 box=rec.source_box,
                 label=rec.label.value if rec.label else None,
                 soft_label=rec.soft_label)
        for i, rec in enumerate(session.crops())
    ]


def _summary(session: Session) -> dict:
    crops = session.crops()
    return {
        "id": session.id,
        "name": session.name,
        "width": session.image.width,
        "height": session.image.height,
        "theta": session.theta,
        "grid": _grid_model(session.grid),
        "crop_count": len(crops),
        "labeled_count": sum(1 for r in crops if r.label is not None),
    }


def create_app(journal_dir: str | None = None,
               frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="tsvmorph labeling service")
    store = SessionStore(journal_dir or os.environ.get("TSVMORPH_JOURNAL_DIR"))
    app.state.store = store

    def get_session(sid: str) -> Session:
        try:
            return store.get(sid)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {sid!r}")

    @app.get("/health")
    def health():
        return {"status": "ok", "sessions": len(store.sessions)}

    @app.post("/sessions", response_model=SessionSummary, status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            png = base64.b64decode(req.png_base64, validate=True)
        except (binascii.Error, ValueError):
            raise HTTPException(status_code=400, detail="png_base64 is not valid base64")
        try:
            session = store.create(req.name, png, req.rows, req.cols, theta=req.theta)
        except (TsvMorphError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _summary(session)

    @app.get("/sessions/{sid}", response_model=SessionDetail)
    def session_detail(sid: str):
        session = get_session(sid)
        return {**_summary(session), "crops": _crop_infos(session)}

    @app.get("/sessions/{sid}/image")
    def session_image(sid: str):
        session = get_session(sid)
        return Response(content=write_png(session.image), media_type="image/png")

    @app.put("/sessions/{sid}/grid", response_model=SessionDetail)
    def update_grid(sid: str, grid: GridModel):
        session = get_session(sid)
        try:
            store.update_grid(sid, GridSpec(**grid.model_dump()))
        except TsvMorphError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {**_summary(session), "crops": _crop_infos(session)}

    @app.get("/sessions/{sid}/preview")
    def preview(sid: str, cell: str = Query(..., pattern=r"^\d+,\d+$")):
        session = get_session(sid)
        row, col = (int(v) for v in cell.split(","))
        for rec in session.crops():
            if rec.grid_cell == (row, col):
                return Response(content=write_png(rec.image), media_type="image/png")
        raise HTTPException(status_code=404, detail=f"no cell ({row},{col})")

    @app.post("/sessions/{sid}/crops/{index}/label", response_model=CropInfo)
    def set_label(sid: str, index: int, req: LabelRequest):
        session = get_session(sid)
        label = None
        if req.label is not None:
            try:
                label = MorphologyLabel(req.label)
            except ValueError:
                raise HTTPException(status_code=400, detail=f"unknown label {req.label!r}")
        soft = req.soft_label
        if soft is not None:
            if any(v < 0 for v in soft) or abs(sum(soft) - 1.0) > SOFT_LABEL_TOL:
                raise HTTPException(
                    status_code=400,
                    detail="soft_label must be non-negative and sum to 1")
        if label is None and soft is None:
            raise HTTPException(status_code=400, detail="label or soft_label required")
        try:
            store.set_label(sid, index, label, soft)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no crop {index}")
        except TsvMorphError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _crop_infos(session)[index]

    @app.post("/sessions/{sid}/export", response_model=ExportResponse)
    def export(sid: str, req: ExportRequest, partial: bool = False):
        get_session(sid)
        try:
            manifest_path, exported, unlabeled = store.export(sid, req.out_dir,
                                                              partial=partial)
        except TsvMorphError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return ExportResponse(manifest_path=str(manifest_path), exported=exported,
                              skipped_unlabeled=unlabeled)

    ui_dir = Path(frontend_dir) if frontend_dir else DEFAULT_FRONTEND
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
