"""Evaluation metrics: CPC, RMSE, Spearman correlation, travel times.

All functions are pure. Matrix arguments must share their zone set; paired
speed tables must share their (road, window) index set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demand import ODMatrix
from .errors import MetricError
from .io import RoadWindow, VehicleRecord


@dataclass
class TravelTimes:
    durations: list[float]  # finished trips only, seconds
    unfinished: int = 0  # driving at horizon or never injected
    horizon: float | None = None  # simulation length, for the penalized variant


def _check_zones(a: ODMatrix, b: ODMatrix) -> None:
    if [z.id for z in a.zones] != [z.id for z in b.zones]:
        raise MetricError("OD matrices do not share a zone set")


def cpc(a: ODMatrix, b: ODMatrix) -> float:
    """Common part of commuting: 2 * sum(min(A,B)) / (sum(A) + sum(B))."""
    _check_zones(a, b)
    total = a.counts.sum() + b.counts.sum()
    if total == 0:
        raise MetricError("cpc undefined: both matrices are all-zero")
    return float(2.0 * np.minimum(a.counts, b.counts).sum() / total)


def _paired_values(a, b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, ODMatrix) and isinstance(b, ODMatrix):
        _check_zones(a, b)
        return a.counts.ravel(), b.counts.ravel()
    if isinstance(a, dict) and isinstance(b, dict):
        if set(a) != set(b):
            raise MetricError("paired tables do not share an index set")
        keys = sorted(a)
        return (
            np.array([a[k] for k in keys], dtype=float),
            np.array([b[k] for k in keys], dtype=float),
        )
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise MetricError("paired sequences differ in shape")
    return x.ravel(), y.ravel()


def rmse(a, b) -> float:
    """Root mean square error over matched entries.

    Accepts OD matrices (same zones), dicts (same keys) or equal-length
    sequences.
    """
    x, y = _paired_values(a, b)
    if x.size == 0:
        raise MetricError("rmse undefined on an empty index set")
    diff = x - y
    return float(math.sqrt(float((diff * diff).mean())))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # ties share the average of ranks i+1 .. j+1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.ndim != 1 or yv.ndim != 1 or len(xv) != len(yv):
        raise MetricError("spearman needs two equal-length vectors")
    if len(xv) < 2:
        raise MetricError("spearman needs at least 2 observations")
    if (xv == xv[0]).all() or (yv == yv[0]).all():
        raise MetricError("spearman undefined for a constant vector")
    rx = _average_ranks(xv)
    ry = _average_ranks(yv)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / math.sqrt(float((rx * rx).sum() * (ry * ry).sum())))


def att(times: TravelTimes) -> float:
    """Average travel time over finished trips."""
    if not times.durations:
        raise MetricError("att undefined: no finished trips")
    return sum(times.durations) / len(times.durations)


def att_penalized(times: TravelTimes) -> float:
    """ATT with every unfinished trip charged the simulation horizon."""
    if times.unfinished and times.horizon is None:
        raise MetricError("penalized att needs a horizon when trips are unfinished")
    total = sum(times.durations) + times.unfinished * (times.horizon or 0.0)
    n = len(times.durations) + times.unfinished
    if n == 0:
        raise MetricError("att undefined: no trips")
    return total / n


# ---------------------------------------------------------------------------
# adapters from simulation outputs


def travel_times_from_records(
    records: list[VehicleRecord],
    departures: dict[int, float],
    dt: float,
    horizon: float,
) -> TravelTimes:
    """Reconstruct travel times from a recorder stream.

    A vehicle is finished iff its last record lies strictly before the
    horizon (vehicles still driving are recorded at the final step); its
    finish time is one step after its last record. Scheduled trips that never
    appear count as unfinished.
    """
    last_t: dict[int, float] = {}
    for rec in records:
        if rec.id not in last_t or rec.t > last_t[rec.id]:
            last_t[rec.id] = rec.t
    durations = []
    unfinished = 0
    for vid, depart in departures.items():
        t = last_t.get(vid)
        if t is None or t >= horizon:
            unfinished += 1
        else:
            durations.append(t + dt - depart)
    return TravelTimes(durations=durations, unfinished=unfinished, horizon=horizon)


def speed_table(windows: list[RoadWindow]) -> dict[tuple[str, float, float], float]:
    """(road, window_start, window_end) -> mean speed, for paired comparisons."""
    return {(w.road, w.window_start, w.window_end): w.mean_speed for w in windows}
