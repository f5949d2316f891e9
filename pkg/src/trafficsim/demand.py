"""OD-matrix generation and conversion to individual timed trips.

Two rule-based distribution models (gravity, radiation) produce zone-to-zone
trip counts; od_to_trips turns fractional counts into concrete vehicles with
origin/destination lanes and departure times. All sampling uses a
counter-based generator keyed by (seed, zone-pair index) so results are
independent of iteration order, runs, and machines.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .network import ROAD, RoadNetwork
from .rng import pair_generator

log = logging.getLogger("trafficsim.demand")


@dataclass(frozen=True)
class Zone:
    id: int
    centroid: tuple[float, float]
    mass: float
    lanes: tuple[int, ...]  # sorted road-lane ids inside the zone


@dataclass
class ODMatrix:
    zones: list[Zone]
    counts: np.ndarray  # |zones| x |zones|, non-negative, zero diagonal

    def __eq__(self, other) -> bool:
        if not isinstance(other, ODMatrix):
            return NotImplemented
        return self.zones == other.zones and np.array_equal(self.counts, other.counts)

    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class Trip:
    id: int
    origin_lane: int
    origin_s: float
    dest_lane: int
    departure: float


@dataclass(frozen=True)
class DepartureProfile:
    kind: str = "uniform"  # uniform | peaked
    window: tuple[float, float] = (0.0, 3600.0)
    peak: tuple[float, float] | None = None  # (mean, stddev), peaked only

    def validate(self) -> None:
        if self.kind not in ("uniform", "peaked"):
            raise InputError(f"unknown departure profile kind {self.kind!r}")
        t0, t1 = self.window
        if not t0 < t1:
            raise InputError("departure window must satisfy t_start < t_end")
        if self.kind == "peaked" and self.peak is None:
            raise InputError("peaked profile needs (mean, stddev)")


def _distance_matrix(zones: list[Zone]) -> np.ndarray:
    xy = np.array([z.centroid for z in zones], dtype=float)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def _check_degenerate(zones: list[Zone], dist: np.ndarray) -> None:
    mass = np.array([z.mass for z in zones])
    massive = mass > 0
    bad = (dist == 0.0) & massive[:, None] & massive[None, :]
    np.fill_diagonal(bad, False)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise InputError(
            f"zones {zones[i].id} and {zones[j].id} have coincident centroids"
        )


def gravity_od(zones: list[Zone], total_trips: float, gamma: float) -> ODMatrix:
    """counts[i][j] = K * m_i * m_j * d_ij^(-gamma), normalized to total_trips.

    Scaling all masses by a constant leaves the result unchanged (K absorbs
    it); the diagonal is zero.
    """
    if total_trips <= 0:
        raise InputError("total_trips must be positive")
    if gamma <= 0:
        raise InputError("gamma must be positive")
    mass = np.array([z.mass for z in zones], dtype=float)
    if (mass > 0).sum() < 2:
        raise InputError("gravity model needs at least 2 zones with positive mass")
    dist = _distance_matrix(zones)
    _check_degenerate(zones, dist)
    with np.errstate(divide="ignore"):
        deterrence = np.where(dist > 0, dist, np.inf) ** (-gamma)
    weights = mass[:, None] * mass[None, :] * deterrence
    np.fill_diagonal(weights, 0.0)
    counts = weights * (total_trips / weights.sum())
    return ODMatrix(zones=list(zones), counts=counts)


def radiation_od(zones: list[Zone], out_trips) -> ODMatrix:
    """Radiation model with per-origin productions.

    counts[i][j] before renormalization is
    out_i * m_i * m_j / ((m_i + s_ij) (m_i + m_j + s_ij)) where s_ij is the
    total mass strictly inside the open disk of radius d_ij around zone i,
    excluding zones i and j; each row is then rescaled to sum to out_i.
    """
    n = len(zones)
    out = np.asarray(out_trips, dtype=float)
    if out.shape != (n,):
        raise InputError("out_trips must supply one value per zone")
    if (out < 0).any():
        raise InputError("out_trips must be non-negative")
    mass = np.array([z.mass for z in zones], dtype=float)
    if (mass > 0).sum() < 2:
        raise InputError("radiation model needs at least 2 zones with positive mass")
    dist = _distance_matrix(zones)
    _check_degenerate(zones, dist)

    counts = np.zeros((n, n))
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")
        sorted_d = dist[i][order]
        prefix = np.concatenate([[0.0], np.cumsum(mass[order])])
        for j in range(n):
            if j == i:
                continue
            # mass strictly closer to i than j, minus zone i itself (d_ii = 0)
            k = np.searchsorted(sorted_d, dist[i][j], side="left")
            s_ij = prefix[k] - mass[i]
            denom = (mass[i] + s_ij) * (mass[i] + mass[j] + s_ij)
            if denom > 0:
                counts[i, j] = mass[i] * mass[j] / denom
        row = counts[i].sum()
        if row > 0:
            counts[i] *= out[i] / row
        elif out[i] > 0:
            log.warning(
                "zone %s: no reachable destination mass, dropping %g productions",
                zones[i].id, out[i],
            )
    return ODMatrix(zones=list(zones), counts=counts)


def od_to_trips(
    od: ODMatrix,
    net: RoadNetwork,
    profile: DepartureProfile,
    seed: int,
    mode_share: float = 1.0,
) -> list[Trip]:
    """Emit stochastic-rounded trips for every OD cell.

    Each zone pair (i, j) uses its own counter-based stream keyed by
    (seed, i*n + j): one draw decides the rounding of the fractional count,
    then each trip draws origin lane, origin position, destination lane and
    departure in a fixed order. Output is sorted by (departure, id).
    """
    profile.validate()
    if not 0.0 <= mode_share <= 1.0:
        raise InputError("mode_share must lie in [0, 1]")
    zones = od.zones
    for zone in zones:
        if not zone.lanes:
            raise InputError(f"zone {zone.id}: empty lane set")
        for lid in zone.lanes:
            if lid not in net.lanes or net.lanes[lid].kind != ROAD:
                raise InputError(f"zone {zone.id}: lane {lid} is not a road lane")

    n = len(zones)
    t0, t1 = profile.window
    trips: list[Trip] = []
    next_id = 0
    for i in range(n):
        origin = zones[i]
        for j in range(n):
            if i == j:
                continue
            expected = float(od.counts[i, j]) * mode_share
            if expected <= 0:
                continue
            rng = pair_generator(seed, i * n + j)
            whole = math.floor(expected)
            count = whole + (1 if rng.random() < expected - whole else 0)
            dest = zones[j]
            for _ in range(count):
                o_lane = origin.lanes[int(rng.integers(len(origin.lanes)))]
                o_s = rng.random() * 0.5 * net.lanes[o_lane].length
                d_lane = dest.lanes[int(rng.integers(len(dest.lanes)))]
                if profile.kind == "uniform":
                    depart = t0 + rng.random() * (t1 - t0)
                else:
                    mean, std = profile.peak
                    while True:
                        depart = rng.normal(mean, std)
                        if t0 <= depart < t1:
                            break
                trips.append(Trip(next_id, o_lane, o_s, d_lane, depart))
                next_id += 1
    trips.sort(key=lambda t: (t.departure, t.id))
    return trips


def make_zones(net: RoadNetwork, nx: int, ny: int) -> list[Zone]:
    """Tile the network bounding box into nx * ny zones.

    Each road lane is assigned by its midpoint; zone mass is the total lane
    length inside the tile (a simple attraction proxy). Empty tiles are
    dropped. Zone ids number tiles row-major from the south-west corner.
    """
    if nx < 1 or ny < 1:
        raise InputError("zone grid needs nx >= 1 and ny >= 1")
    mids: dict[int, tuple[float, float]] = {}
    for lid in net.road_lane_ids():
        lane = net.lanes[lid]
        xs = [p[0] for p in lane.centerline]
        ys = [p[1] for p in lane.centerline]
        mids[lid] = ((min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0)
    if not mids:
        raise InputError("network has no road lanes")
    min_x = min(p[0] for p in mids.values())
    max_x = max(p[0] for p in mids.values())
    min_y = min(p[1] for p in mids.values())
    max_y = max(p[1] for p in mids.values())
    span_x = (max_x - min_x) or 1.0
    span_y = (max_y - min_y) or 1.0

    members: dict[int, list[int]] = {}
    for lid, (x, y) in mids.items():
        cx = min(int((x - min_x) / span_x * nx), nx - 1)
        cy = min(int((y - min_y) / span_y * ny), ny - 1)
        members.setdefault(cy * nx + cx, []).append(lid)

    zones: list[Zone] = []
    for tile in sorted(members):
        lane_ids = tuple(sorted(members[tile]))
        pts = [mids[lid] for lid in lane_ids]
        centroid = (
            sum(p[0] for p in pts) / len(pts),
            sum(p[1] for p in pts) / len(pts),
        )
        mass = sum(net.lanes[lid].length for lid in lane_ids)
        zones.append(Zone(id=tile, centroid=centroid, mass=mass, lanes=lane_ids))
    return zones


def random_trips(
    net: RoadNetwork,
    count: int,
    seed: int,
    window: tuple[float, float] = (0.0, 3600.0),
) -> list[Trip]:
    """Uniform random trips over all road lanes, for benchmarks and tests."""
    if count < 0:
        raise InputError("count must be non-negative")
    t0, t1 = window
    if not t0 < t1:
        raise InputError("window must satisfy t_start < t_end")
    lane_ids = sorted(net.road_lane_ids())
    if not lane_ids:
        raise InputError("network has no road lanes")
    rng = pair_generator(seed, 0)
    trips = []
    for k in range(count):
        o_lane = lane_ids[int(rng.integers(len(lane_ids)))]
        o_s = rng.random() * 0.5 * net.lanes[o_lane].length
        d_lane = lane_ids[int(rng.integers(len(lane_ids)))]
        depart = t0 + rng.random() * (t1 - t0)
        trips.append(Trip(k, o_lane, o_s, d_lane, depart))
    trips.sort(key=lambda t: (t.departure, t.id))
    return trips
