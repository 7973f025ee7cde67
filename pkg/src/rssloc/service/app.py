"""FastAPI service wrapping the core package.

Endpoints: POST /simulate, POST /run, POST /eval, GET /health. The CLI is a
thin client of these; any other HTTP client works the same way.
"""
from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from ..core import Position, RssVector, StepMeasurement
from ..dataset import Dataset
from ..pipeline import (
    METHODS,
    RunReport,
    compute_metrics,
    merge_reports,
    run_pipeline,
    simulate_scenario,
)
from . import schemas as s

app = FastAPI(title="rssloc", description="IMU dead reckoning + WiFi RSS loop-closure localization")


def payload_to_dataset(p: s.DatasetPayload) -> Dataset:
    steps = tuple(
        StepMeasurement(t=r.t, delta_l=r.dl, delta_theta=r.dtheta) for r in p.steps
    )
    scans = tuple(
        RssVector(readings={rd.ap: rd.rss for rd in r.readings}, t=r.t) for r in p.scans
    )
    truth = tuple(Position(r.x, r.y) for r in p.truth) if p.truth else None
    times = tuple(r.t for r in p.truth) if p.truth else None
    return Dataset(steps=steps, scans=scans, truth=truth, truth_times=times)


def dataset_to_payload(d: Dataset) -> s.DatasetPayload:
    return s.DatasetPayload(
        steps=[s.StepRecord(t=x.t, dl=x.delta_l, dtheta=x.delta_theta) for x in d.steps],
        scans=[
            s.ScanRecord(
                t=x.t,
                readings=[s.Reading(ap=ap, rss=rss) for ap, rss in sorted(x.readings.items())],
            )
            for x in d.scans
        ],
        truth=(
            [s.TruthRecord(t=t, x=p.x, y=p.y) for t, p in zip(d.truth_times, d.truth)]
            if d.truth
            else None
        ),
    )


def report_to_response(report: RunReport) -> s.RunResponse:
    return s.RunResponse(
        seed=report.seed,
        config=report.config,
        methods={
            name: s.MethodReport(
                trajectory=[tuple(p) for p in r.trajectory],
                errors=r.errors,
                engine_time_s=r.engine_time_s,
                per_epoch_time_s=r.per_epoch_time_s,
            )
            for name, r in report.methods.items()
        },
    )


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/simulate", response_model=s.SimulateResponse)
def simulate(req: s.SimulateRequest) -> s.SimulateResponse:
    try:
        scenario = simulate_scenario(req.as_config())
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return s.SimulateResponse(
        dataset=dataset_to_payload(scenario.dataset),
        seed=int(req.as_config().get("seed", 0)),
        start_x=scenario.start.x,
        start_y=scenario.start.y,
        start_theta=scenario.start_heading.theta,
        steps_per_lap=scenario.steps_per_lap,
    )


@app.post("/run", response_model=s.RunResponse)
def run(req: s.RunRequest) -> s.RunResponse:
    for m in req.methods:
        if m not in METHODS:
            raise HTTPException(status_code=422, detail=f"unknown method {m!r}")
    try:
        dataset = payload_to_dataset(req.dataset)
        reports = [run_pipeline(dataset, req.config, m) for m in req.methods]
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return report_to_response(merge_reports(reports))


@app.post("/eval", response_model=s.EvalResponse)
def evaluate(req: s.EvalRequest) -> s.EvalResponse:
    rows = []
    for name, r in req.report.methods.items():
        errors = r.errors
        if errors is None and req.truth is not None:
            if len(req.truth) != len(r.trajectory):
                raise HTTPException(
                    status_code=422,
                    detail=f"truth length {len(req.truth)} != trajectory length {len(r.trajectory)}",
                )
            errors = [
                math.hypot(px - t.x, py - t.y)
                for (px, py), t in zip(r.trajectory, req.truth)
            ]
        if errors is None:
            raise HTTPException(status_code=422, detail=f"no errors or truth for method {name!r}")
        windows = req.windows or [(0, len(errors))]
        try:
            means = compute_metrics(errors, windows)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        rows.extend(
            s.WindowMetrics(method=name, window=w, mean_error_m=m)
            for w, m in zip(windows, means)
        )
    return s.EvalResponse(metrics=rows)
