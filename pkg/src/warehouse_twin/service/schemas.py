"""Request/response models for the control API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class RuleOut(BaseModel):
    stop_radius_x: float
    slow_radius_y: float
    slow_factor: float


class AgentOut(BaseModel):
    id: int
    x: float
    y: float
    state: str


class AmrOut(AgentOut):
    speed: float
    gov: str


class ClockOut(BaseModel):
    tick: int
    t: float


class StateOut(BaseModel):
    clock: ClockOut
    paused: bool
    time_scale: float
    active_rule: RuleOut
    preference: dict
    amrs: list[AmrOut]
    workers: list[AgentOut]
    orders: dict
    safety_min: float
    safety_mean: float
    productivity: float | None
    avg_service_time: float | None
    baseline_interarrival: float


class MetricsOut(BaseModel):
    t: list[float]
    safety_mean: list[float]
    safety_min: list[float]
    completions: dict


class AlternativeOut(BaseModel):
    id: str
    index: int
    selections: dict
    params: RuleOut


class WhatIfIn(BaseModel):
    horizon: float = Field(default=600.0, gt=0)
    replications: int = Field(default=5, ge=1)
    candidates: list[str] | None = None  # alternative ids; default: all
    seed_base: int | None = None


class WhatIfAccepted(BaseModel):
    analysis_id: str
    status: str


class WhatIfRow(BaseModel):
    alternative_id: str
    safety_score: float
    productivity_score: float
    safety_ci: float
    productivity_ci: float
    safety_raw: list[float]
    productivity_raw: list[float]
    on_pareto_front: bool


class WhatIfOut(BaseModel):
    analysis_id: str
    status: str
    t: float | None = None
    results: list[WhatIfRow] | None = None
    front_ids: list[str] | None = None
    selected_id: str | None = None
    error: str | None = None


class PreferenceIn(BaseModel):
    w_s: float
    w_p: float


class EnactIn(BaseModel):
    alternative_id: str
    analysis_id: str


class ControlIn(BaseModel):
    action: str  # pause | resume | time_scale
    value: float | None = None


class Ack(BaseModel):
    ok: bool = True
    detail: str | None = None
