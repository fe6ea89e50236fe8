"""Incoming flows: intervals where a monitored curve increases."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_STEPS = 3
RELATIVE_THRESHOLD = 1e-6
# curves that are zero up to round-off (a dark-state QFI, say) must stay flat
ABSOLUTE_THRESHOLD = 1e-10


@dataclass
class FlowIntervals:
    intervals: list = field(default_factory=list)
    source_tag: str = ""

    @property
    def total(self) -> float:
        return float(sum(b - a for a, b in self.intervals))


def incoming_flow(times, values, deriv_threshold: float | None = None,
                  source_tag: str = "", min_steps: int = MIN_STEPS) -> FlowIntervals:
    """Runs of grid points with dA/dt above threshold, merged into intervals.

    The default threshold is RELATIVE_THRESHOLD * max|A|, never below
    ABSOLUTE_THRESHOLD. Runs spanning fewer
    than ``min_steps`` grid steps are dropped.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if deriv_threshold is None:
        scale = float(np.max(np.abs(values), initial=0.0))
        deriv_threshold = max(RELATIVE_THRESHOLD * scale, ABSOLUTE_THRESHOLD)
    up = np.gradient(values, times) > deriv_threshold
    edges = np.diff(up.astype(int))
    starts = list(np.nonzero(edges == 1)[0] + 1)
    stops = list(np.nonzero(edges == -1)[0])
    if up[0]:
        starts.insert(0, 0)
    if up[-1]:
        stops.append(len(up) - 1)
    intervals = [(float(times[a]), float(times[b]))
                 for a, b in zip(starts, stops) if b - a >= min_steps]
    return FlowIntervals(intervals, source_tag)


def _measure(intervals) -> float:
    return float(sum(b - a for a, b in intervals))


def intersect(a: FlowIntervals, b: FlowIntervals) -> list:
    out = []
    for a0, a1 in a.intervals:
        for b0, b1 in b.intervals:
            lo, hi = max(a0, b0), min(a1, b1)
            if hi > lo:
                out.append((lo, hi))
    return out


def overlap_fraction(a: FlowIntervals, b: FlowIntervals) -> float:
    """Share of a's flow time that falls inside b's flow; 1 when a is empty."""
    total = _measure(a.intervals)
    if total == 0.0:
        return 1.0
    return _measure(intersect(a, b)) / total
