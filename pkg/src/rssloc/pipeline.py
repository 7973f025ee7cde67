"""Pipeline orchestration: scenario simulation, method execution (raw dead
reckoning, loop-closure filter, GP baseline), error metrics and plot-data
emission. Wall-clock timing brackets the filter engine only, never I/O.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import FilterConfig, Heading, Position
from .dataset import Dataset
from .filter import dead_reckon, initialize
from .gp import ConstantMean, GpHyperparams, MeanModel, gp_predict, gp_update_weights
from .sim import (
    Environment,
    GroundTruth,
    ImuErrorModel,
    corrupt_steps,
    generate_path,
    grid_environment,
    random_environment,
    rectangle,
    simulate_rss,
)
from .sync import align_observations

METHODS = ("raw", "proposed", "gp")


# -- configuration ----------------------------------------------------------

_FILTER_FIELDS = (
    "n_particles", "sigma_step", "sigma_heading", "d_rss_thres", "d_pos_thres",
    "min_gap_time", "min_gap_dist", "penalty_factor", "missing_fill_dbm",
    "rng_seed", "ess_fraction",
)
_GP_FIELDS = ("signal_variance", "length_scale", "noise_variance", "training_radius")


def filter_config_from(cfg: dict) -> FilterConfig:
    return FilterConfig(**{k: cfg[k] for k in _FILTER_FIELDS if k in cfg})


def gp_hyperparams_from(cfg: dict) -> GpHyperparams:
    return GpHyperparams(**{k: cfg[k] for k in _GP_FIELDS if k in cfg})


def parse_windows(text: str) -> list[tuple[int, int]]:
    """Epoch windows as 'start:end,start:end' (half-open ranges)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        a, b = part.split(":")
        out.append((int(a), int(b)))
    return out


# -- scenario simulation ----------------------------------------------------

SCENARIO_DEFAULTS = {
    "rect_width": 40.0,
    "rect_height": 20.0,
    "laps": 3,
    "step_length": 0.7,
    "step_noise_sigma": 0.03,
    "heading_noise_sigma": 0.01,
    "heading_bias_per_step": 0.003,
    "n_aps": 12,
    "tx_power_dbm": -20.0,
    "path_loss_exponent": 4.0,
    "shadowing_sigma": 3.0,
    "detection_floor_dbm": -95.0,
    "scan_period": 1.0,
    "ap_margin": 5.0,
    "ap_placement": "grid",
    "ap_jitter": 2.0,
    "seed": 0,
}


@dataclass(frozen=True)
class Scenario:
    dataset: Dataset
    truth: GroundTruth
    environment: Environment
    start: Position
    start_heading: Heading
    steps_per_lap: int


def simulate_scenario(cfg: dict) -> Scenario:
    """Closed rectangular loop walked for several laps, corrupted steps and
    path-loss WiFi scans, all driven by one seed."""
    c = {**SCENARIO_DEFAULTS, **cfg}
    seed = int(c["seed"])
    shape = rectangle(float(c["rect_width"]), float(c["rect_height"]))
    truth = generate_path(shape, int(c["laps"]), float(c["step_length"]))
    err = ImuErrorModel(
        step_noise_sigma=float(c["step_noise_sigma"]),
        heading_noise_sigma=float(c["heading_noise_sigma"]),
        heading_bias_per_step=float(c["heading_bias_per_step"]),
    )
    steps = corrupt_steps(truth, err, seed=seed)
    margin = float(c["ap_margin"])
    placement = grid_environment if c["ap_placement"] == "grid" else random_environment
    extra = {"jitter": float(c["ap_jitter"])} if c["ap_placement"] == "grid" else {}
    env = placement(
        n_aps=int(c["n_aps"]),
        x_range=(-margin, float(c["rect_width"]) + margin),
        y_range=(-margin, float(c["rect_height"]) + margin),
        seed=seed + 1,
        tx_power_dbm=float(c["tx_power_dbm"]),
        path_loss_exponent=float(c["path_loss_exponent"]),
        shadowing_sigma=float(c["shadowing_sigma"]),
        detection_floor_dbm=float(c["detection_floor_dbm"]),
        **extra,
    )
    scans = simulate_rss(truth, env, scan_period=float(c["scan_period"]), seed=seed + 2)
    dataset = Dataset(
        steps=tuple(steps),
        scans=tuple(scans),
        truth=truth.positions,
        truth_times=truth.times,
    )
    return Scenario(
        dataset=dataset,
        truth=truth,
        environment=env,
        start=truth.positions[0],
        start_heading=Heading(truth.headings[0]),
        steps_per_lap=(len(truth.positions) - 1) // int(c["laps"]),
    )


# -- execution --------------------------------------------------------------

@dataclass
class MethodResult:
    method: str
    trajectory: list[tuple[float, float]]
    errors: list[float] | None
    engine_time_s: float
    per_epoch_time_s: list[float]


@dataclass
class RunReport:
    seed: int
    config: dict
    methods: dict[str, MethodResult] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        methods = {}
        for name, r in self.methods.items():
            entry = {"trajectory": [list(p) for p in r.trajectory], "errors": r.errors}
            if include_timing:
                entry["engine_time_s"] = r.engine_time_s
                entry["per_epoch_time_s"] = r.per_epoch_time_s
            methods[name] = entry
        return {"seed": self.seed, "config": self.config, "methods": methods}

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        report = cls(seed=d["seed"], config=d["config"])
        for name, entry in d["methods"].items():
            report.methods[name] = MethodResult(
                method=name,
                trajectory=[tuple(p) for p in entry["trajectory"]],
                errors=entry["errors"],
                engine_time_s=entry.get("engine_time_s", 0.0),
                per_epoch_time_s=entry.get("per_epoch_time_s", []),
            )
        return report


def _start_pose(dataset: Dataset, cfg: dict) -> tuple[Position, Heading]:
    if "start_x" in cfg or "start_y" in cfg or "start_theta" in cfg:
        return (
            Position(float(cfg.get("start_x", 0.0)), float(cfg.get("start_y", 0.0))),
            Heading(float(cfg.get("start_theta", 0.0))),
        )
    if dataset.truth and len(dataset.truth) >= 2:
        p0, p1 = dataset.truth[0], dataset.truth[1]
        return p0, Heading(math.atan2(p1.y - p0.y, p1.x - p0.x))
    return Position(0.0, 0.0), Heading(0.0)


def _truth_per_epoch(dataset: Dataset) -> list[Position] | None:
    """True position at each epoch (start + one per step), matched by time."""
    if dataset.truth is None:
        return None
    times = np.array(dataset.truth_times)
    out = [dataset.truth[0]]
    for s in dataset.steps:
        k = int(np.argmin(np.abs(times - s.t)))
        out.append(dataset.truth[k])
    return out


def run_pipeline(dataset: Dataset, cfg: dict, method: str) -> RunReport:
    """Run one method over the whole dataset and report its trajectory,
    per-epoch errors (when ground truth is present) and engine timing."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    fcfg = filter_config_from(cfg)
    start, start_heading = _start_pose(dataset, cfg)
    epochs = align_observations(list(dataset.steps), list(dataset.scans))

    per_epoch: list[float] = []
    trajectory: list[tuple[float, float]] = [(start.x, start.y)]
    t0 = time.perf_counter()
    if method == "raw":
        path, _ = dead_reckon(start, start_heading, dataset.steps)
        engine_time = time.perf_counter() - t0
        trajectory = [(p.x, p.y) for p in path]
    else:
        ens = initialize(start, start_heading, fcfg)
        hp = gp_hyperparams_from(cfg)
        mean: MeanModel = ConstantMean(float(cfg.get("gp_mean_constant", -75.0)))
        for epoch in epochs:
            te = time.perf_counter()
            if method == "proposed":
                ens.step(epoch)
            else:
                ens.propagate(epoch)
                if epoch.rss is not None:
                    gp_update_weights(ens, epoch.rss, hp, means={}, default_mean=mean)
                ens.maybe_resample()
            pos, _ = ens.estimate()
            per_epoch.append(time.perf_counter() - te)
            trajectory.append((pos.x, pos.y))
        engine_time = time.perf_counter() - t0

    errors = None
    truth = _truth_per_epoch(dataset)
    if truth is not None and len(truth) == len(trajectory):
        errors = [
            math.hypot(px - tp.x, py - tp.y)
            for (px, py), tp in zip(trajectory, truth)
        ]

    report = RunReport(seed=int(fcfg.rng_seed), config=dict(cfg))
    report.methods[method] = MethodResult(
        method=method,
        trajectory=trajectory,
        errors=errors,
        engine_time_s=engine_time,
        per_epoch_time_s=per_epoch,
    )
    return report


def merge_reports(reports: list[RunReport]) -> RunReport:
    merged = RunReport(seed=reports[0].seed, config=reports[0].config)
    for r in reports:
        merged.methods.update(r.methods)
    return merged


# -- metrics ----------------------------------------------------------------

def compute_metrics(
    errors: list[float], windows: list[tuple[int, int]]
) -> list[float]:
    """Arithmetic mean error per half-open epoch window."""
    out = []
    for a, b in windows:
        if not (0 <= a < b <= len(errors)):
            raise ValueError(f"window {a}:{b} out of range for {len(errors)} epochs")
        out.append(float(np.mean(errors[a:b])))
    return out


# -- plot data --------------------------------------------------------------

def emit_plot_data(report: RunReport, out_dir: str | Path) -> list[Path]:
    """CSV emission: one trajectory file per method (epoch,x,y) and, when
    ground truth errors exist, one error-curve file per method (epoch,error)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, r in report.methods.items():
        path = out / f"trajectory_{name}.csv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write("epoch,x,y\n")
            for k, (x, y) in enumerate(r.trajectory):
                fh.write(f"{k},{x!r},{y!r}\n")
        written.append(path)
        if r.errors is not None:
            path = out / f"errors_{name}.csv"
            with path.open("w", encoding="utf-8") as fh:
                fh.write("epoch,error\n")
                for k, e in enumerate(r.errors):
                    fh.write(f"{k},{e!r}\n")
            written.append(path)
    return written


def emit_gp_grid(
    dataset: Dataset,
    trajectory: list[tuple[float, float]],
    ap: str,
    hp: GpHyperparams,
    mean: MeanModel,
    bounds: tuple[float, float, float, float],
    resolution: int,
    out_path: str | Path,
) -> Path:
    """Predicted RSS surface (x,y,mu,var) for one AP over a grid, trained on
    every epoch whose scan carries that AP, positions taken from the given
    trajectory. Variance is maximal where no samples are nearby."""
    epochs = align_observations(list(dataset.steps), list(dataset.scans))
    train = []
    for k, epoch in enumerate(epochs, start=1):
        if epoch.rss is not None and ap in epoch.rss.readings:
            x, y = trajectory[k]
            train.append((Position(x, y), epoch.rss.readings[ap]))
    x0, y0, x1, y1 = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write("x,y,mu,var\n")
        for y in ys:
            for x in xs:
                q = Position(float(x), float(y))
                local = [(p, v) for p, v in train if p.distance_to(q) <= hp.training_radius]
                mu, var = gp_predict(local, q, hp, mean)
                fh.write(f"{x!r},{y!r},{mu!r},{var!r}\n")
    return out_path


def save_report(report: RunReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")


def load_report(path: str | Path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
