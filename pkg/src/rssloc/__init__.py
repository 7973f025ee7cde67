"""rssloc: pedestrian localization fusing foot-mounted-IMU dead reckoning
with WiFi RSS loop closure, plus a Gaussian-process baseline, a synthetic
world simulator, an HTTP service and a CLI."""

from .core import (
    FilterConfig,
    Heading,
    ObservationEntry,
    Particle,
    Position,
    RssVector,
    StepMeasurement,
    fill_union,
    rss_distance,
)
from .filter import ClosureMatch, Ensemble, initialize, knn_estimate
from .sync import AlignedEpoch, align_observations

__all__ = [
    "AlignedEpoch",
    "ClosureMatch",
    "Ensemble",
    "FilterConfig",
    "Heading",
    "ObservationEntry",
    "Particle",
    "Position",
    "RssVector",
    "StepMeasurement",
    "align_observations",
    "fill_union",
    "initialize",
    "knn_estimate",
    "rss_distance",
]
