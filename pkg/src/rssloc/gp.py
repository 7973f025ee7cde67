"""Gaussian-process baseline: per-AP RSS regression over nearby trajectory
positions and likelihood-based particle weighting.

This is the comparison method. Each particle trains its own GP per AP from
the observation entries whose positions (according to that particle) lie
within a fixed radius of its current position, then scores the current scan
under the predictive distribution. Training-set sizes differ across
particles, which is exactly the consistency problem the loop-closure filter
avoids.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import ObservationEntry, Position, RssVector
from .filter import Ensemble

log = logging.getLogger(__name__)

LIKELIHOOD_FLOOR = 1e-12


@dataclass(frozen=True)
class ConstantMean:
    c: float


@dataclass(frozen=True)
class SlopeInterceptMean:
    """RSS decreasing linearly with distance from the AP: slope * dist + at_ap."""
    slope: float
    at_ap: float
    ap_pos: Position


@dataclass(frozen=True)
class AttenuationMean:
    """RSS at 1 m minus an attenuation factor times distance: at_1m - atten * dist.

    Despite the name of the model it descends from, this is linear in
    distance as published, not logarithmic; implemented as printed.
    """
    at_1m: float
    atten: float
    ap_pos: Position


MeanModel = Union[ConstantMean, SlopeInterceptMean, AttenuationMean]


def mean_value(model: MeanModel, p: Position) -> float:
    if isinstance(model, ConstantMean):
        return model.c
    dist = p.distance_to(model.ap_pos)
    if isinstance(model, SlopeInterceptMean):
        return model.slope * dist + model.at_ap
    return model.at_1m - model.atten * dist


@dataclass(frozen=True)
class GpHyperparams:
    signal_variance: float = 16.0
    length_scale: float = 5.0
    noise_variance: float = 4.0
    training_radius: float = 10.0

    def __post_init__(self):
        for name in ("signal_variance", "length_scale", "noise_variance", "training_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def sparse_select(
    trajectory: list[Position],
    entries: list[ObservationEntry],
    center: Position,
    radius: float,
    ap: str,
) -> list[tuple[Position, float]]:
    """Training pairs for one AP: every entry with a reading for that AP whose
    trajectory position lies within the closed ball of `radius` around `center`."""
    out = []
    for e in entries:
        if e.rss is None or ap not in e.rss.readings:
            continue
        p = trajectory[e.step_index]
        if p.distance_to(center) <= radius:
            out.append((p, e.rss.readings[ap]))
    return out


def _kernel(a: np.ndarray, b: np.ndarray, hp: GpHyperparams) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return hp.signal_variance * np.exp(-d2 / (2.0 * hp.length_scale**2))


def gp_predict(
    train: list[tuple[Position, float]],
    query: Position,
    hp: GpHyperparams,
    mean: MeanModel,
) -> tuple[float, float]:
    """Squared-exponential GP regression on residuals from the mean model.

    Returns the predictive mean and variance (including observation noise)
    at `query`. An empty training set reverts to the prior.
    """
    if not train:
        return mean_value(mean, query), hp.signal_variance + hp.noise_variance
    x = np.array([[p.x, p.y] for p, _ in train])
    y = np.array([v - mean_value(mean, p) for p, v in train])
    q = np.array([[query.x, query.y]])
    k_xx = _kernel(x, x, hp) + hp.noise_variance * np.eye(len(train))
    k_qx = _kernel(q, x, hp)[0]
    try:
        chol = np.linalg.cholesky(k_xx)
    except np.linalg.LinAlgError:
        k_xx += 1e-8 * hp.signal_variance * np.eye(len(train))
        chol = np.linalg.cholesky(k_xx)  # raises again if still singular
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    v = np.linalg.solve(chol, k_qx)
    mu = mean_value(mean, query) + float(k_qx @ alpha)
    var = hp.signal_variance - float(v @ v) + hp.noise_variance
    return mu, max(var, 0.0)


def _gaussian_likelihood(value: float, mu: float, var: float) -> float:
    return math.exp(-((value - mu) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def gp_update_weights(
    ens: Ensemble,
    current: RssVector,
    hp: GpHyperparams,
    means: dict[str, MeanModel],
    default_mean: MeanModel | None = None,
) -> Ensemble:
    """Re-weight every particle by the GP likelihood of the current scan.

    Per particle and per AP present in the scan, a GP is trained on the
    in-radius observation entries (excluding the current epoch) and the
    observed value is scored under its predictive distribution; AP
    likelihoods multiply (independence assumption). APs missing from the
    scan are skipped. A per-AP likelihood floor avoids total annihilation.
    """
    if default_mean is None:
        default_mean = ConstantMean(-75.0)
    past = ens.observation_list[:-1]  # current epoch excluded from training
    # trajectory positions as arrays per particle for fast radius queries
    entry_pos = np.stack(
        [ens.positions[e.step_index] for e in past]
    ) if past else np.empty((0, ens.n, 2))
    current_pos = ens.positions[-1]
    new_weights = ens.weights.copy()
    for i in range(ens.n):
        center = current_pos[i]
        if len(past):
            dist = np.linalg.norm(entry_pos[:, i, :] - center, axis=1)
            in_ball = dist <= hp.training_radius
        likelihood = 1.0
        for ap, observed in current.readings.items():
            mean = means.get(ap, default_mean)
            train = []
            if len(past):
                for j in np.nonzero(in_ball)[0]:
                    e = past[j]
                    if e.rss is not None and ap in e.rss.readings:
                        p = entry_pos[j, i]
                        train.append((Position(float(p[0]), float(p[1])), e.rss.readings[ap]))
            mu, var = gp_predict(
                train, Position(float(center[0]), float(center[1])), hp, mean
            )
            likelihood *= max(_gaussian_likelihood(observed, mu, var), LIKELIHOOD_FLOOR)
        new_weights[i] *= likelihood
    total = new_weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        log.warning(
            "GP weight degeneracy at step %d: resetting to uniform", ens.step_count
        )
        ens.weights = np.full(ens.n, 1.0 / ens.n)
    else:
        ens.weights = new_weights / total
    return ens
