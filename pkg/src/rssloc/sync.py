"""Alignment of asynchronous WiFi scans with step-wise dead-reckoning updates.

Steps and scans come from independent sensors on independent clocks. Each
step is paired with the most recent scan taken after the previous step and
no later than the step itself; steps with no such scan carry no RSS, and
earlier scans shadowed inside the same interval are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import RssVector, StepMeasurement


@dataclass(frozen=True)
class AlignedEpoch:
    step: StepMeasurement
    rss: RssVector | None


def _check_sorted(times, what: str):
    for a, b in zip(times, times[1:]):
        if b <= a:
            raise ValueError(f"non-monotone timestamps in {what}")


def align_observations(
    steps: list[StepMeasurement], scans: list[RssVector]
) -> list[AlignedEpoch]:
    """Pair each step with the latest scan in (previous step time, step time].

    Both inputs must be time-sorted. Each scan is used at most once; scans
    arriving after the final step are discarded (the filter is step-driven).
    """
    _check_sorted([s.t for s in steps], "steps")
    _check_sorted([s.t for s in scans], "scans")

    epochs: list[AlignedEpoch] = []
    j = 0
    for step in steps:
        chosen = None
        while j < len(scans) and scans[j].t <= step.t:
            chosen = scans[j]
            j += 1
        epochs.append(AlignedEpoch(step=step, rss=chosen))
    return epochs
