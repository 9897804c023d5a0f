"""Request/response models for the labeling service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class GridModel(BaseModel):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    x_offset: int = 0
    y_offset: int = 0
    cell_width: int = Field(default=54, ge=8)
    cell_height: int = Field(default=54, ge=8)
    x_pitch: int = Field(default=54, ge=1)
    y_pitch: int = Field(default=54, ge=1)
    x_skew: int = 0
    y_skew: int = 0
    low_confidence: bool = False


class CreateSessionRequest(BaseModel):
    png_base64: str
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    theta: float = 12.0
    name: str = "mosaic"


class CropInfo(BaseModel):
    index: int
    row: int
    col: int
    box: tuple[int, int, int, int]
    label: str | None = None
    soft_label: tuple[float, float, float] | None = None


class SessionSummary(BaseModel):
    id: str
    name: str
    width: int
    height: int
    theta: float
    grid: GridModel
    crop_count: int
    labeled_count: int


class SessionDetail(SessionSummary):
    crops: list[CropInfo]


class LabelRequest(BaseModel):
    label: str | None = None
    soft_label: tuple[float, float, float] | None = None


class ExportRequest(BaseModel):
    out_dir: str


class ExportResponse(BaseModel):
    manifest_path: str
    exported: int
    skipped_unlabeled: int
