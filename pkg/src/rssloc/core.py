"""Shared domain types: positions, steps, RSS vectors, particles, filter config.

Also holds the RSS-space metric (normalized Euclidean distance over the
union of access points seen by either vector) and the missing-AP fill rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

RSS_FLOOR_DBM = -110.0
RSS_CEIL_DBM = 0.0


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("position components must be finite")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Heading:
    """Heading in radians, stored unwrapped (any real value).

    Wrapping is applied only inside trigonometric evaluation; tests compare
    headings modulo 2*pi.
    """
    theta: float

    def wrapped(self) -> float:
        return math.atan2(math.sin(self.theta), math.cos(self.theta))


@dataclass(frozen=True)
class StepMeasurement:
    """One detected step: timestamp, step length and heading change."""
    t: float
    delta_l: float
    delta_theta: float

    def __post_init__(self):
        if self.delta_l < 0:
            raise ValueError("step length must be nonnegative")


def clamp_rss(rss_dbm: float) -> float:
    """Clamp an RSS reading into the valid [-110, 0] dBm range.

    Values below -110 dBm are treated as buried in noise and raised to the
    floor; values above 0 dBm are physically implausible and rejected by the
    dataset loader before reaching here.
    """
    return max(RSS_FLOOR_DBM, min(RSS_CEIL_DBM, rss_dbm))


@dataclass(frozen=True)
class RssVector:
    """One WiFi scan: mapping of AP id to RSS in dBm, with a timestamp."""
    readings: dict[str, float]
    t: float = 0.0

    def __post_init__(self):
        for ap, rss in self.readings.items():
            if not (RSS_FLOOR_DBM <= rss <= RSS_CEIL_DBM):
                raise ValueError(
                    f"rss for {ap!r} out of range [{RSS_FLOOR_DBM}, {RSS_CEIL_DBM}]: {rss}"
                )

    @classmethod
    def from_raw(cls, readings: dict[str, float], t: float = 0.0) -> "RssVector":
        """Build a vector with sub-floor readings clamped up to -110 dBm."""
        return cls({ap: clamp_rss(v) for ap, v in readings.items()}, t)


def fill_union(a: RssVector, b: RssVector, fill: float = RSS_FLOOR_DBM):
    """Densify two scans over the sorted union of their AP ids.

    An AP absent from one side contributes `fill` on that side. Returns two
    equal-length lists; empty union gives two empty lists.
    """
    aps = sorted(set(a.readings) | set(b.readings))
    va = [a.readings.get(ap, fill) for ap in aps]
    vb = [b.readings.get(ap, fill) for ap in aps]
    return va, vb


def rss_distance(a: RssVector, b: RssVector, fill: float = RSS_FLOOR_DBM) -> float:
    """Normalized Euclidean distance sqrt(sum((a_j-b_j)^2)/N) over the filled union."""
    va, vb = fill_union(a, b, fill)
    n = len(va)
    if n == 0:
        raise ValueError("no common signal space")
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(va, vb)) / n)


@dataclass(frozen=True)
class Particle:
    """One hypothesis: an entire candidate trajectory plus heading and weight."""
    trajectory: tuple[Position, ...]
    heading: Heading
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("particle weight must be nonnegative")


@dataclass(frozen=True)
class ObservationEntry:
    """One step's slot in the shared observation list.

    `rss` is None when no scan arrived between the previous step and this
    one. `walked_dist` is the cumulative dead-reckoned path length.
    """
    step_index: int
    t: float
    rss: RssVector | None
    walked_dist: float


@dataclass(frozen=True)
class FilterConfig:
    """All filter tunables. Threshold defaults follow the published values
    (8 dB / 10 m / 10 s / 20 m / 1% penalty / -110 dBm fill); particle count,
    noise sigmas and the resampling trigger are design defaults."""
    n_particles: int = 1000
    sigma_step: float = 0.05
    sigma_heading: float = 0.04
    d_rss_thres: float = 8.0
    d_pos_thres: float = 10.0
    min_gap_time: float = 10.0
    min_gap_dist: float = 20.0
    penalty_factor: float = 0.01
    missing_fill_dbm: float = RSS_FLOOR_DBM
    rng_seed: int = 0
    ess_fraction: float = 0.5

    def __post_init__(self):
        if self.n_particles <= 0:
            raise ValueError("n_particles must be positive")
        if self.sigma_step < 0 or self.sigma_heading < 0:
            raise ValueError("noise sigmas must be nonnegative")
        if not 0 < self.penalty_factor <= 1:
            raise ValueError("penalty_factor must be in (0, 1]")
        if not 0 < self.ess_fraction <= 1:
            raise ValueError("ess_fraction must be in (0, 1]")
        for name in ("d_rss_thres", "d_pos_thres", "min_gap_time", "min_gap_dist"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
