"""Deterministic synthetic world: closed-loop walking paths, IMU-style step
corruption with systematic heading drift, and log-distance path-loss WiFi
scans with shadowing and a detection floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Position, RssVector, StepMeasurement, clamp_rss

STEP_PERIOD_S = 0.5


@dataclass(frozen=True)
class AccessPoint:
    ap_id: str
    pos: Position
    tx_power_dbm: float = -20.0
    path_loss_exponent: float = 4.0
    shadowing_sigma: float = 3.0
    detection_floor_dbm: float = -95.0

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.detection_floor_dbm < -110:
            raise ValueError("detection floor below -110 dBm")


@dataclass(frozen=True)
class Environment:
    aps: tuple[AccessPoint, ...]


@dataclass(frozen=True)
class ImuErrorModel:
    step_noise_sigma: float = 0.0
    heading_noise_sigma: float = 0.0
    heading_bias_per_step: float = 0.0

    def __post_init__(self):
        if self.step_noise_sigma < 0 or self.heading_noise_sigma < 0:
            raise ValueError("noise sigmas must be nonnegative")


@dataclass(frozen=True)
class GroundTruth:
    """True positions and headings, one per step plus the start."""
    positions: tuple[Position, ...]
    headings: tuple[float, ...]

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(i * STEP_PERIOD_S for i in range(len(self.positions)))


def rectangle(width: float, height: float, origin: Position = Position(0.0, 0.0)):
    """Closed rectangular polyline starting at `origin`, counterclockwise."""
    x0, y0 = origin.x, origin.y
    return [
        Position(x0, y0),
        Position(x0 + width, y0),
        Position(x0 + width, y0 + height),
        Position(x0, y0 + height),
        Position(x0, y0),
    ]


def generate_path(shape: list[Position], laps: int, step_length: float) -> GroundTruth:
    """Equally spaced true positions along a closed polyline walked `laps` times.

    The step count is rounded so the total path length divides evenly; the
    effective spacing therefore differs from `step_length` by at most half a
    step over the whole walk.
    """
    if step_length <= 0:
        raise ValueError("step_length must be positive")
    if laps < 1:
        raise ValueError("laps must be at least 1")
    if shape[0].distance_to(shape[-1]) > 1e-12:
        raise ValueError("polyline must be closed")
    seg_len = [shape[i].distance_to(shape[i + 1]) for i in range(len(shape) - 1)]
    perimeter = sum(seg_len)
    if perimeter <= 0:
        raise ValueError("degenerate polyline")
    total = perimeter * laps
    n_steps = max(1, round(total / step_length))
    spacing = total / n_steps

    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    positions = []
    for k in range(n_steps + 1):
        s = (k * spacing) % perimeter
        seg = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg_len) - 1)
        frac = (s - cum[seg]) / seg_len[seg]
        a, b = shape[seg], shape[seg + 1]
        positions.append(Position(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y)))
    # heading of the step arriving at sample k; the start takes the first step's
    headings = [
        math.atan2(positions[k].y - positions[k - 1].y, positions[k].x - positions[k - 1].x)
        for k in range(1, n_steps + 1)
    ]
    headings.insert(0, headings[0])
    return GroundTruth(positions=tuple(positions), headings=tuple(headings))


def _wrap(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


def corrupt_steps(
    truth: GroundTruth, err: ImuErrorModel, seed: int
) -> list[StepMeasurement]:
    """Per-step length/heading-change measurements with additive noise and a
    constant heading bias (the accumulative drift of a real foot module)."""
    g = np.random.default_rng(seed)
    steps = []
    for k in range(1, len(truth.positions)):
        true_len = truth.positions[k - 1].distance_to(truth.positions[k])
        true_dth = _wrap(truth.headings[k] - truth.headings[k - 1])
        dl = true_len + (g.normal(0.0, err.step_noise_sigma) if err.step_noise_sigma else 0.0)
        dth = true_dth + err.heading_bias_per_step + (
            g.normal(0.0, err.heading_noise_sigma) if err.heading_noise_sigma else 0.0
        )
        steps.append(StepMeasurement(t=k * STEP_PERIOD_S, delta_l=max(dl, 0.0), delta_theta=dth))
    return steps


def path_loss_dbm(ap: AccessPoint, d: float) -> float:
    """Log-distance path loss, referenced to 1 m."""
    return ap.tx_power_dbm - 10.0 * ap.path_loss_exponent * math.log10(max(d, 1.0))


def _true_position_at(truth: GroundTruth, t: float) -> Position:
    times = truth.times
    if t <= times[0]:
        return truth.positions[0]
    if t >= times[-1]:
        return truth.positions[-1]
    k = int(t / STEP_PERIOD_S)
    frac = (t - times[k]) / STEP_PERIOD_S
    a, b = truth.positions[k], truth.positions[min(k + 1, len(truth.positions) - 1)]
    return Position(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y))


def simulate_rss(
    truth: GroundTruth, env: Environment, scan_period: float, seed: int
) -> list[RssVector]:
    """Scans at a fixed cadence: per AP, path loss plus lognormal shadowing;
    readings below the AP's detection floor are omitted entirely."""
    if scan_period <= 0:
        raise ValueError("scan_period must be positive")
    g = np.random.default_rng(seed)
    duration = truth.times[-1]
    scans = []
    t = scan_period
    while t <= duration + 1e-9:
        pos = _true_position_at(truth, t)
        readings = {}
        for ap in env.aps:
            rss = path_loss_dbm(ap, pos.distance_to(ap.pos))
            if ap.shadowing_sigma:
                rss += g.normal(0.0, ap.shadowing_sigma)
            if rss >= ap.detection_floor_dbm:
                readings[ap.ap_id] = clamp_rss(rss)
        scans.append(RssVector(readings=readings, t=t))
        t += scan_period
    return scans


def grid_environment(
    n_aps: int,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    seed: int,
    jitter: float = 2.0,
    tx_power_dbm: float = -20.0,
    path_loss_exponent: float = 4.0,
    shadowing_sigma: float = 3.0,
    detection_floor_dbm: float = -95.0,
) -> Environment:
    """APs on a jittered near-square grid over the area, ids AP00, AP01, ...

    Grid placement keeps the RSS field spatially discriminative: uniform
    random placement can cluster APs and leave distant places with nearly
    identical signatures.
    """
    g = np.random.default_rng(seed)
    w = x_range[1] - x_range[0]
    h = y_range[1] - y_range[0]
    cols = max(1, math.ceil(math.sqrt(n_aps * max(w, 1e-9) / max(h, 1e-9))))
    rows = math.ceil(n_aps / cols)
    xs = np.linspace(x_range[0], x_range[1], cols)
    ys = np.linspace(y_range[0], y_range[1], rows)
    aps = []
    for y in ys:
        for x in xs:
            if len(aps) == n_aps:
                break
            aps.append(
                AccessPoint(
                    ap_id=f"AP{len(aps):02d}",
                    pos=Position(
                        float(x + g.uniform(-jitter, jitter)),
                        float(y + g.uniform(-jitter, jitter)),
                    ),
                    tx_power_dbm=tx_power_dbm,
                    path_loss_exponent=path_loss_exponent,
                    shadowing_sigma=shadowing_sigma,
                    detection_floor_dbm=detection_floor_dbm,
                )
            )
    return Environment(aps=tuple(aps))


def random_environment(
    n_aps: int,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    seed: int,
    tx_power_dbm: float = -20.0,
    path_loss_exponent: float = 4.0,
    shadowing_sigma: float = 3.0,
    detection_floor_dbm: float = -95.0,
) -> Environment:
    """APs placed uniformly at random over the given area, ids AP00, AP01, ..."""
    g = np.random.default_rng(seed)
    aps = tuple(
        AccessPoint(
            ap_id=f"AP{i:02d}",
            pos=Position(g.uniform(*x_range), g.uniform(*y_range)),
            tx_power_dbm=tx_power_dbm,
            path_loss_exponent=path_loss_exponent,
            shadowing_sigma=shadowing_sigma,
            detection_floor_dbm=detection_floor_dbm,
        )
        for i in range(n_aps)
    )
    return Environment(aps=aps)
