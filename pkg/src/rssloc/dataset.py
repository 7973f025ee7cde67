"""Dataset serialization: three JSONL files per dataset directory.

steps.jsonl  {"t": s, "dl": m, "dtheta": rad}
scans.jsonl  {"t": s, "readings": [{"ap": "id", "rss": dbm}, ...]}
truth.jsonl  {"t": s, "x": m, "y": m}          (optional)

One record per line, UTF-8. Plus a flat key=value config format shared by
scenario and run configuration.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .core import RSS_CEIL_DBM, RSS_FLOOR_DBM, Position, RssVector, StepMeasurement, clamp_rss

log = logging.getLogger(__name__)

STEPS_FILE = "steps.jsonl"
SCANS_FILE = "scans.jsonl"
TRUTH_FILE = "truth.jsonl"


@dataclass(frozen=True)
class Dataset:
    steps: tuple[StepMeasurement, ...]
    scans: tuple[RssVector, ...]
    truth: tuple[Position, ...] | None
    truth_times: tuple[float, ...] | None = None


class DatasetError(ValueError):
    pass


def _parse_lines(path: Path):
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path.name}:{lineno}: malformed JSON: {exc}") from exc


def _check_monotone(times, name: str):
    for a, b in zip(times, times[1:]):
        if b <= a:
            raise DatasetError(f"{name}: non-monotone timestamps ({a} then {b})")


def load_dataset(dir_path: str | Path) -> Dataset:
    """Load and validate a dataset directory. Raises DatasetError with the
    offending file and line number on malformed input."""
    d = Path(dir_path)
    steps = []
    for lineno, rec in _parse_lines(d / STEPS_FILE):
        try:
            if rec["dl"] < 0:
                raise DatasetError(f"{STEPS_FILE}:{lineno}: negative step length {rec['dl']}")
            steps.append(StepMeasurement(t=float(rec["t"]), delta_l=float(rec["dl"]),
                                         delta_theta=float(rec["dtheta"])))
        except KeyError as exc:
            raise DatasetError(f"{STEPS_FILE}:{lineno}: missing field {exc}") from exc
    _check_monotone([s.t for s in steps], STEPS_FILE)

    scans = []
    for lineno, rec in _parse_lines(d / SCANS_FILE):
        readings = {}
        for r in rec.get("readings", []):
            rss = float(r["rss"])
            if rss > RSS_CEIL_DBM:
                raise DatasetError(f"{SCANS_FILE}:{lineno}: rss above 0 dBm: {rss}")
            if rss < RSS_FLOOR_DBM:
                log.warning("%s:%d: rss %g dBm below floor, clamped to %g",
                            SCANS_FILE, lineno, rss, RSS_FLOOR_DBM)
                rss = clamp_rss(rss)
            readings[str(r["ap"])] = rss
        scans.append(RssVector(readings=readings, t=float(rec["t"])))
    _check_monotone([s.t for s in scans], SCANS_FILE)

    truth = None
    truth_times = None
    truth_path = d / TRUTH_FILE
    if truth_path.exists():
        pts, times = [], []
        for lineno, rec in _parse_lines(truth_path):
            pts.append(Position(float(rec["x"]), float(rec["y"])))
            times.append(float(rec["t"]))
        _check_monotone(times, TRUTH_FILE)
        truth, truth_times = tuple(pts), tuple(times)

    return Dataset(steps=tuple(steps), scans=tuple(scans), truth=truth, truth_times=truth_times)


def save_dataset(dataset: Dataset, dir_path: str | Path) -> None:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    with (d / STEPS_FILE).open("w", encoding="utf-8") as fh:
        for s in dataset.steps:
            fh.write(json.dumps({"t": s.t, "dl": s.delta_l, "dtheta": s.delta_theta}) + "\n")
    with (d / SCANS_FILE).open("w", encoding="utf-8") as fh:
        for scan in dataset.scans:
            fh.write(json.dumps({
                "t": scan.t,
                "readings": [{"ap": ap, "rss": rss} for ap, rss in sorted(scan.readings.items())],
            }) + "\n")
    if dataset.truth is not None:
        times = dataset.truth_times or tuple(range(len(dataset.truth)))
        with (d / TRUTH_FILE).open("w", encoding="utf-8") as fh:
            for t, p in zip(times, dataset.truth):
                fh.write(json.dumps({"t": t, "x": p.x, "y": p.y}) + "\n")


def parse_config_text(text: str) -> dict[str, object]:
    """Flat key=value config: one pair per line, '#' comments, values parsed
    as int, float, bool or str."""
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = _coerce(value)
    return out


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def load_config_file(path: str | Path) -> dict[str, object]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
