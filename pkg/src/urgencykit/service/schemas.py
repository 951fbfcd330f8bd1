"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ScoreRequest(BaseModel):
    texts: list[str]


class ScoredText(BaseModel):
    score: float = Field(ge=0.0, le=1.0)
    verdict: str


class ScoreResponse(BaseModel):
    results: list[ScoredText]


class ScheduleBody(BaseModel):
    seed_size: int = Field(default=100, ge=1)
    batch_size: int = Field(default=100, ge=1)
    target_total: int = Field(default=400, ge=1)


class CreateSessionRequest(BaseModel):
    seed: int | None = None
    schedule: ScheduleBody | None = None


class SessionStatus(BaseModel):
    session_id: str
    round: int
    model_version: int
    labeled_count: int
    pending_count: int
    pool_count: int
    target_total: int
    complete: bool


class PendingMessage(BaseModel):
    id: str
    text: str
    score: float | None = None


class BatchResponse(BaseModel):
    session_id: str
    round: int
    model_version: int
    messages: list[PendingMessage]


class LabelItem(BaseModel):
    id: str
    label: int = Field(ge=0, le=1)


class SubmitLabelsRequest(BaseModel):
    labels: list[LabelItem]


class HealthResponse(BaseModel):
    status: str
    model_loaded: bool
    pool_size: int | None = None
