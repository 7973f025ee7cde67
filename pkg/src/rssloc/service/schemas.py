"""Pydantic request/response models for the HTTP service.

Record models mirror the JSONL dataset schema one-to-one so files and wire
payloads are interchangeable.
"""
from __future__ import annotations

from pydantic import BaseModel, Field


class StepRecord(BaseModel):
    t: float
    dl: float = Field(ge=0)
    dtheta: float


class Reading(BaseModel):
    ap: str
    rss: float = Field(ge=-110, le=0)


class ScanRecord(BaseModel):
    t: float
    readings: list[Reading] = Field(default_factory=list)


class TruthRecord(BaseModel):
    t: float
    x: float
    y: float


class DatasetPayload(BaseModel):
    steps: list[StepRecord]
    scans: list[ScanRecord]
    truth: list[TruthRecord] | None = None


class SimulateRequest(BaseModel):
    """Scenario parameters; unset fields fall back to the scenario defaults."""
    rect_width: float | None = None
    rect_height: float | None = None
    laps: int | None = None
    step_length: float | None = None
    step_noise_sigma: float | None = None
    heading_noise_sigma: float | None = None
    heading_bias_per_step: float | None = None
    n_aps: int | None = None
    tx_power_dbm: float | None = None
    path_loss_exponent: float | None = None
    shadowing_sigma: float | None = None
    detection_floor_dbm: float | None = None
    scan_period: float | None = None
    ap_margin: float | None = None
    seed: int | None = None

    def as_config(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class SimulateResponse(BaseModel):
    dataset: DatasetPayload
    seed: int
    start_x: float
    start_y: float
    start_theta: float
    steps_per_lap: int


class RunRequest(BaseModel):
    dataset: DatasetPayload
    config: dict = Field(default_factory=dict)
    methods: list[str] = Field(default_factory=lambda: ["proposed"])


class MethodReport(BaseModel):
    trajectory: list[tuple[float, float]]
    errors: list[float] | None = None
    engine_time_s: float = 0.0
    per_epoch_time_s: list[float] = Field(default_factory=list)


class RunResponse(BaseModel):
    seed: int
    config: dict
    methods: dict[str, MethodReport]


class EvalRequest(BaseModel):
    report: RunResponse
    truth: list[TruthRecord] | None = None
    windows: list[tuple[int, int]] | None = None


class WindowMetrics(BaseModel):
    method: str
    window: tuple[int, int]
    mean_error_m: float


class EvalResponse(BaseModel):
    metrics: list[WindowMetrics]
