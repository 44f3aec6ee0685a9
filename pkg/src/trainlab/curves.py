"""Learning-curve analytics over training-metric event logs.

Event logs are JSON lines of the form
``{"run": str, "metric": str, "step": int, "wall_time": float, "value": float}``
with wall_time in seconds since training start.  Scores like BLEU flicker
between checkpoints, so the headline statistic here is Time Till Score: the
earliest time after which the metric never again falls below a threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class CurvePoint:
    step: int
    wall_time: float
    value: float

    def __post_init__(self) -> None:
        if self.step < 0:
            raise ValueError(f"negative step: {self.step}")
        if self.wall_time < 0:
            raise ValueError(f"negative wall_time: {self.wall_time}")


@dataclass(frozen=True)
class Curve:
    """One metric's time series for one run, ordered by wall-clock time."""

    metric_name: str
    points: tuple[CurvePoint, ...]
    source_run: str = ""

    def __post_init__(self) -> None:
        for a, b in zip(self.points, self.points[1:]):
            if b.wall_time <= a.wall_time:
                raise ValueError(
                    f"{self.source_run}/{self.metric_name}: wall_time must be "
                    f"strictly increasing ({a.wall_time} then {b.wall_time})"
                )
            if b.step < a.step:
                raise ValueError(
                    f"{self.source_run}/{self.metric_name}: steps must be "
                    f"non-decreasing ({a.step} then {b.step})"
                )

    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    def wall_times(self) -> np.ndarray:
        return np.array([p.wall_time for p in self.points])

    def steps(self) -> np.ndarray:
        return np.array([p.step for p in self.points])


def ingest_events(path) -> list[Curve]:
    """Parse an event log into one Curve per (run, metric) series.

    Lines must already be ordered by wall_time within each series; a
    non-monotonic series is an error rather than being silently reordered.
    Malformed lines are reported with their line number.  Curves are returned
    in first-appearance order.
    """
    path = Path(path)
    series: dict[tuple[str, str], list[CurvePoint]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["run"]), str(rec["metric"]))
                point = CurvePoint(
                    step=int(rec["step"]),
                    wall_time=float(rec["wall_time"]),
                    value=float(rec["value"]),
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad event line: {exc}") from exc
            points = series.setdefault(key, [])
            if points and point.wall_time <= points[-1].wall_time:
                raise ValueError(
                    f"{path}:{lineno}: wall_time {point.wall_time} does not advance "
                    f"within run {key[0]!r} metric {key[1]!r}"
                )
            points.append(point)
    return [
        Curve(metric_name=metric, points=tuple(points), source_run=run)
        for (run, metric), points in series.items()
    ]


def _smoothed_values(curve: Curve, window: int) -> np.ndarray:
    """Centered moving average over ``window`` points (odd width, edges shrink)."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"smoothing window must be a positive odd point count, got {window}")
    values = curve.values()
    half = window // 2
    return np.array(
        [values[max(0, i - half) : i + half + 1].mean() for i in range(len(values))]
    )


def time_till_score(
    curve: Curve, threshold: float, smooth_window: Optional[int] = None
) -> Optional[float]:
    """Wall time of the earliest point after which the value never drops below
    ``threshold``; None when the threshold is never durably reached.

    ``smooth_window`` optionally pre-smooths the values with a centered moving
    average over that many points before applying the strict definition.
    """
    if not curve.points:
        raise ValueError("curve has no points")
    values = _smoothed_values(curve, smooth_window) if smooth_window else curve.values()
    below = np.nonzero(values < threshold)[0]
    if below.size == 0:
        return curve.points[0].wall_time
    first_ok = int(below[-1]) + 1
    if first_ok >= len(curve.points):
        return None
    return curve.points[first_ok].wall_time


def examples_till_score(
    tts_hours: Optional[float], throughput_subwords_per_hour: float
) -> Optional[float]:
    """Training data consumed to durably reach the score: TTS times throughput.

    Propagates None for a threshold that was never achieved.
    """
    if tts_hours is None:
        return None
    if tts_hours < 0 or throughput_subwords_per_hour < 0:
        raise ValueError("inputs must be non-negative")
    return tts_hours * throughput_subwords_per_hour


def convergence_speed(curve: Curve, window: float) -> list[tuple[float, float]]:
    """Metric growth rate in value per hour over a centered window of ``window`` seconds.

    For every point whose centered window lies inside the curve's time span,
    the slope is the value change across the window (linear interpolation at
    its ends) divided by the window length in hours.  A converged flat curve
    yields zeros.
    """
    if window <= 0:
        raise ValueError(f"window must be > 0, got {window}")
    times = curve.wall_times()
    if len(times) < 2 or times[-1] - times[0] < window:
        raise ValueError("curve spans less than one window")
    values = curve.values()
    half = window / 2.0
    hours = window / SECONDS_PER_HOUR
    out = []
    for t in times:
        if t - half < times[0] or t + half > times[-1]:
            continue
        lo = float(np.interp(t - half, times, values))
        hi = float(np.interp(t + half, times, values))
        out.append((float(t), (hi - lo) / hours))
    return out


def emit_plot_data(
    curve: Curve, x_axis: str, effective_batch: Optional[float] = None
) -> str:
    """Two-column TSV of the curve against hours, steps or examples processed.

    The examples axis is step times effective batch size and therefore
    requires ``effective_batch``.
    """
    if x_axis == "hours":
        header = "hours"
        xs = [p.wall_time / SECONDS_PER_HOUR for p in curve.points]
    elif x_axis == "steps":
        header = "steps"
        xs = [p.step for p in curve.points]
    elif x_axis == "examples":
        if effective_batch is None:
            raise ValueError("the examples axis requires effective_batch")
        header = "examples"
        xs = [p.step * effective_batch for p in curve.points]
    else:
        raise ValueError(f"unknown x_axis {x_axis!r}; expected hours, steps or examples")
    lines = [f"{header}\t{curve.metric_name}"]
    lines += [f"{x:.9g}\t{p.value:.9g}" for x, p in zip(xs, curve.points)]
    return "\n".join(lines) + "\n"
