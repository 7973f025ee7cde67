"""Trajectory-history particle filter with RSS loop-closure re-weighting.

Each particle carries the full candidate trajectory, not just the latest
pose. Weights are updated by checking each particle's self-consistency in
signal-strength space: when the current scan resembles one stored earlier
(far enough back in time and walked distance), the particle's own positions
at those earlier epochs yield a fingerprinting estimate of where it should
be now; particles that disagree with their own history are penalized.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FilterConfig,
    Heading,
    ObservationEntry,
    Particle,
    Position,
    RssVector,
)
from .sync import AlignedEpoch

log = logging.getLogger(__name__)

_PROPAGATE_STREAM = 0
_RESAMPLE_STREAM = 1


def _stream(seed: int, stream_id: int, step_index: int) -> np.random.Generator:
    """Counter-based random stream keyed by (seed, stream, step).

    Every draw is a pure function of the key and its position in the block,
    so per-particle noise is identical no matter how (or in what order)
    particles are evaluated.
    """
    return np.random.Generator(
        np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, (stream_id << 40) + step_index])
    )


def propagation_noise(seed: int, step_index: int, n: int):
    """Standard-normal draws (step-length, heading) for all n particles at one step."""
    g = _stream(seed, _PROPAGATE_STREAM, step_index)
    z = g.standard_normal((2, n))
    return z[0], z[1]


@dataclass(frozen=True)
class ClosureMatch:
    """An observation-list entry whose RSS lies within the similarity threshold."""
    entry_index: int
    d_rss: float


def knn_estimate(particle: Particle, matches: list[ClosureMatch]) -> Position:
    """Inverse-distance weighted average of this particle's positions at the
    matched entries. An exact RSS match (distance 0) short-circuits to that
    position directly, since the 1/d weight is singular there."""
    if not matches:
        raise ValueError("knn_estimate requires at least one match")
    for m in matches:
        if m.d_rss == 0.0:
            return particle.trajectory[m.entry_index]
    nf = sum(1.0 / m.d_rss for m in matches)
    x = sum(particle.trajectory[m.entry_index].x / m.d_rss for m in matches) / nf
    y = sum(particle.trajectory[m.entry_index].y / m.d_rss for m in matches) / nf
    return Position(x, y)


class Ensemble:
    """N particles sharing one observation list, advanced step by step.

    Trajectories are stored column-wise (one (N, 2) array per epoch) and the
    observation list keeps a dense RSS matrix over all APs seen so far, so
    the per-epoch similarity search is a single vectorized pass.
    """

    def __init__(self, start: Position, start_heading: Heading, config: FilterConfig):
        n = config.n_particles
        self.config = config
        self.positions: list[np.ndarray] = [
            np.tile(np.array([start.x, start.y]), (n, 1))
        ]
        self.headings = np.full(n, start_heading.theta, dtype=float)
        self.weights = np.full(n, 1.0 / n)
        self.observation_list: list[ObservationEntry] = []
        self.step_count = 0
        self._walked = 0.0
        # dense RSS history: one row per entry, one column per AP id seen so far
        self._ap_cols: dict[str, int] = {}
        self._rss_matrix = np.empty((0, 0))
        self._entry_t = np.empty(0)
        self._entry_walked = np.empty(0)
        self._has_rss = np.empty(0, dtype=bool)

    # -- particle views -------------------------------------------------

    @property
    def n(self) -> int:
        return self.config.n_particles

    def particle(self, i: int) -> Particle:
        traj = tuple(Position(p[i, 0], p[i, 1]) for p in self.positions)
        return Particle(trajectory=traj, heading=Heading(self.headings[i]), weight=self.weights[i])

    def particles(self) -> list[Particle]:
        return [self.particle(i) for i in range(self.n)]

    # -- observation list bookkeeping -----------------------------------

    def _append_entry(self, rss: RssVector | None, t: float):
        entry = ObservationEntry(
            step_index=self.step_count, t=t, rss=rss, walked_dist=self._walked
        )
        self.observation_list.append(entry)
        if rss is not None:
            for ap in rss.readings:
                if ap not in self._ap_cols:
                    self._ap_cols[ap] = len(self._ap_cols)
        rows, cols = self._rss_matrix.shape
        if len(self._ap_cols) > cols:
            pad = np.full((rows, len(self._ap_cols) - cols), np.nan)
            self._rss_matrix = np.hstack([self._rss_matrix, pad]) if rows else np.empty(
                (0, len(self._ap_cols))
            )
        row = np.full(len(self._ap_cols), np.nan)
        if rss is not None:
            for ap, v in rss.readings.items():
                row[self._ap_cols[ap]] = v
        self._rss_matrix = np.vstack([self._rss_matrix, row]) if self._rss_matrix.size or row.size else np.empty((rows + 1, 0))
        self._entry_t = np.append(self._entry_t, t)
        self._entry_walked = np.append(self._entry_walked, self._walked)
        self._has_rss = np.append(self._has_rss, rss is not None)

    def _batch_rss_distance(self, current: RssVector) -> np.ndarray:
        """Distance from `current` to every stored entry, pair-union fill
        semantics: APs absent on both sides are excluded from the dimension.
        Entries without RSS (or with an empty union) get +inf."""
        fill = self.config.missing_fill_dbm
        n_aps = len(self._ap_cols)
        cur = np.full(n_aps, np.nan)
        for ap, v in current.readings.items():
            col = self._ap_cols.get(ap)
            if col is not None:
                cur[col] = v
        extra = [v for ap, v in current.readings.items() if ap not in self._ap_cols]

        m = self._rss_matrix
        if m.shape[1] != n_aps:  # only possible when no entries yet
            m = np.empty((len(self.observation_list), n_aps))
        in_union = ~(np.isnan(m) & np.isnan(cur))
        diff = np.where(np.isnan(m), fill, m) - np.where(np.isnan(cur), fill, cur)
        sq = np.where(in_union, diff * diff, 0.0).sum(axis=1)
        dim = in_union.sum(axis=1)
        # APs in the current scan but never stored: union member for every pair
        for v in extra:
            sq = sq + (v - fill) ** 2
            dim = dim + 1
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.sqrt(sq / np.maximum(dim, 1))
        d[dim == 0] = np.inf
        d[~self._has_rss] = np.inf
        return d

    # -- filter operations ----------------------------------------------

    def propagate(self, epoch: AlignedEpoch) -> "Ensemble":
        """Advance every particle by the measured step plus its own noise draw,
        and append the epoch's observation slot to the shared list."""
        cfg = self.config
        self.step_count += 1
        z_l, z_th = propagation_noise(cfg.rng_seed, self.step_count, self.n)
        self.headings = self.headings + epoch.step.delta_theta + cfg.sigma_heading * z_th
        length = np.maximum(epoch.step.delta_l + cfg.sigma_step * z_l, 0.0)
        last = self.positions[-1]
        new = last + np.column_stack(
            [length * np.cos(self.headings), length * np.sin(self.headings)]
        )
        self.positions.append(new)
        self._walked += epoch.step.delta_l
        self._append_entry(epoch.rss, epoch.step.t)
        return self

    def find_similar_rss(self, current: RssVector) -> list[ClosureMatch]:
        """Observation-list entries within the RSS threshold, excluding ones
        too close in time or walked distance to constrain a loop."""
        cfg = self.config
        d = self._batch_rss_distance(current)
        ok = (
            (d < cfg.d_rss_thres)
            & (current.t - self._entry_t > cfg.min_gap_time)
            & (self._walked - self._entry_walked > cfg.min_gap_dist)
        )
        return [ClosureMatch(int(i), float(d[i])) for i in np.nonzero(ok)[0]]

    def update_weights(self, current: RssVector | None) -> "Ensemble":
        if current is None:
            return self
        matches = self.find_similar_rss(current)
        if not matches:
            return self
        idx = [m.entry_index for m in matches]
        d = np.array([m.d_rss for m in matches])
        matched = np.stack([self.positions[i] for i in idx])  # (m, N, 2)
        if np.any(d == 0.0):
            knn = matched[int(np.argmax(d == 0.0))]
        else:
            w = (1.0 / d) / (1.0 / d).sum()
            knn = np.einsum("m,mnc->nc", w, matched)
        d_knn = np.linalg.norm(knn - self.positions[-1], axis=1)
        penalized = d_knn > self.config.d_pos_thres
        self.weights = np.where(
            penalized, self.weights * self.config.penalty_factor, self.weights
        )
        self._normalize()
        return self

    def _normalize(self):
        total = self.weights.sum()
        if total <= 0.0 or not np.isfinite(total):
            log.warning(
                "weight degeneracy at step %d: all weights underflowed, resetting to uniform",
                self.step_count,
            )
            self.weights = np.full(self.n, 1.0 / self.n)
        else:
            self.weights = self.weights / total

    def ess(self) -> float:
        return 1.0 / float((self.weights**2).sum())

    def maybe_resample(self) -> "Ensemble":
        """Systematic resampling when the effective sample size drops below
        the configured fraction of N. Full trajectories are copied."""
        if self.ess() >= self.config.ess_fraction * self.n:
            return self
        g = _stream(self.config.rng_seed, _RESAMPLE_STREAM, self.step_count)
        u0 = g.random() / self.n
        pointers = u0 + np.arange(self.n) / self.n
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0  # guard rounding
        idx = np.searchsorted(cum, pointers, side="left")
        self.positions = [p[idx] for p in self.positions]
        self.headings = self.headings[idx]
        self.weights = np.full(self.n, 1.0 / self.n)
        return self

    def estimate(self) -> tuple[Position, Particle]:
        """Weighted-mean current position, plus the max-weight particle as the
        retroactively corrected full trajectory (ties: lowest index)."""
        if self.step_count < 1:
            raise ValueError("no steps processed yet")
        mean = self.weights @ self.positions[-1]
        best = int(np.argmax(self.weights))
        return Position(float(mean[0]), float(mean[1])), self.particle(best)

    def step(self, epoch: AlignedEpoch) -> "Ensemble":
        """One filter epoch: propagate, re-weight on RSS consistency, resample."""
        self.propagate(epoch)
        self.update_weights(epoch.rss)
        self.maybe_resample()
        return self


def initialize(start: Position, start_heading: Heading, config: FilterConfig) -> Ensemble:
    """Ensemble of N identical particles at the known start pose, weight 1/N."""
    return Ensemble(start, start_heading, config)


def dead_reckon(
    start: Position, start_heading: Heading, steps
) -> tuple[list[Position], Heading]:
    """Noise-free integration of the step increments from the start pose."""
    x, y, th = start.x, start.y, start_heading.theta
    out = [start]
    for s in steps:
        th = th + s.delta_theta
        x += s.delta_l * math.cos(th)
        y += s.delta_l * math.sin(th)
        out.append(Position(x, y))
    return out, Heading(th)
