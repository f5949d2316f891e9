"""World state and the two-phase simulation step.

Each step runs three stages:

1. prepare: rebuild the per-lane index (vehicles sorted by decreasing s,
   ties by ascending id) and freeze a read-only motion snapshot.
2. update: for every driving vehicle, independently sense the environment
   through the index/snapshot, evaluate a randomized MOBIL lane change,
   compute IDM acceleration and integrate. Each vehicle writes only its own
   delta, so this stage can be chunked across worker threads without
   changing the result.
3. commit: apply deltas sequentially in vehicle-id order; lane transitions
   with red-light clamping, a front-to-back collision floor sweep, arrivals,
   queued-trip injection, signal advancement and speed accumulators.

Randomness is keyed by (seed, stream, vehicle id, step), never by scheduling
order, so runs are byte-identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .. import geometry
from ..demand import Trip
from ..errors import InputError, NoRouteError
from ..io import RoadWindow, VehicleRecord
from ..network import CONNECTOR, OPEN, ROAD, RoadNetwork
from ..rng import STREAM_MOBIL, keyed_uniform
from . import signals
from .idm import idm_accel
from .mobil import VehicleView, evaluate_change
from .params import FIXED, EngineConfig
from .routing import Router, roads_of_route

WAITING = "waiting"
DRIVING = "driving"
FINISHED = "finished"
DROPPED = "dropped"

_EPS_GAP = 1e-6


class Vehicle:
    __slots__ = (
        "id", "route", "route_index", "lane_id", "s", "v", "length", "status",
        "depart_time", "finish_time", "dest_lane", "origin_s", "roads_seq",
        "road_pos", "snap_lane", "snap_s", "snap_v", "snap_ri", "snap_rp",
        "idx_pos", "d_lane", "d_s", "d_v", "d_changed", "reverted",
    )

    def __init__(self, trip: Trip, length: float):
        self.id = trip.id
        self.route: list[int] = []
        self.route_index = 0
        self.lane_id = trip.origin_lane
        self.s = trip.origin_s
        self.v = 0.0
        self.length = length
        self.status = WAITING
        self.depart_time = trip.departure
        self.finish_time: float | None = None
        self.dest_lane = trip.dest_lane
        self.origin_s = trip.origin_s
        self.roads_seq: list[str] = []
        self.road_pos = 0
        self.reverted = False


@dataclass(frozen=True)
class StepReport:
    time: float
    driving: int
    waiting: int
    finished: int
    dropped: int
    injected_now: int
    finished_now: int


@dataclass
class StatusView:
    id: int
    lane_id: int
    s: float
    v: float
    status: str
    route_index: int
    depart_time: float
    finish_time: float | None


@dataclass
class SimulationOutput:
    steps: int
    dt: float
    finished: list[tuple[int, float, float]]  # (vehicle id, depart, finish)
    driving_at_end: int
    unserved: int
    dropped: int
    total_trips: int
    road_windows: list[RoadWindow] = field(default_factory=list)
    vehicle_updates: int = 0

    def travel_durations(self) -> list[float]:
        return [fin - dep for _, dep, fin in self.finished]


class World:
    def __init__(
        self,
        net: RoadNetwork,
        trips: list[Trip],
        config: EngineConfig | None = None,
        seed: int = 0,
    ):
        config = config or EngineConfig()
        config.validate()
        self.net = net
        self.config = config
        self.seed = seed
        self.time = 0.0
        self.router = Router(net)

        n_lanes = (max(net.lanes) + 1) if net.lanes else 0
        self._len: list[float] = [0.0] * n_lanes
        self._cap: list[float] = [1.0] * n_lanes
        self._kind: list[str] = [""] * n_lanes
        self._parent: list[str] = [""] * n_lanes
        self._open: list[bool] = [False] * n_lanes
        self._left: list[int | None] = [None] * n_lanes
        self._right: list[int | None] = [None] * n_lanes
        self._succ1: list[int | None] = [None] * n_lanes  # connector successor
        self._pred1: list[int | None] = [None] * n_lanes  # connector predecessor
        self._line: list = [None] * n_lanes
        self._cum: list = [None] * n_lanes
        self._junction_of: list[str | None] = [None] * n_lanes  # connectors only
        for lid, lane in net.lanes.items():
            self._len[lid] = lane.length
            self._cap[lid] = lane.max_speed
            self._kind[lid] = lane.kind
            self._parent[lid] = lane.parent
            self._open[lid] = lane.restriction == OPEN
            self._left[lid] = lane.left
            self._right[lid] = lane.right
            self._line[lid] = lane.centerline
            self._cum[lid] = geometry.cumulative_lengths(lane.centerline)
            if lane.kind == CONNECTOR:
                self._succ1[lid] = lane.successors[0]
                self._pred1[lid] = lane.predecessors[0]
                self._junction_of[lid] = lane.parent

        # (road lane id, next road id) -> smallest connector id
        self._conn_from: dict[tuple[int, str], int] = {}
        # (road id, next road id) -> lane ids of `road` that can reach `next road`
        self._feasible: dict[tuple[str, str], tuple[int, ...]] = {}
        for lid, lane in sorted(net.lanes.items()):
            if lane.kind != CONNECTOR:
                continue
            src = lane.predecessors[0]
            dst_road = net.lanes[lane.successors[0]].parent
            key = (src, dst_road)
            if key not in self._conn_from:
                self._conn_from[key] = lid
        feas: dict[tuple[str, str], set[int]] = {}
        for (src, dst_road) in self._conn_from:
            feas.setdefault((self._parent[src], dst_road), set()).add(src)
        self._feasible = {k: tuple(sorted(v)) for k, v in feas.items()}

        self._signal_states: dict[str, signals.SignalState] = {}
        for jid in sorted(net.junctions):
            junc = net.junctions[jid]
            if junc.signal is not None:
                if config.controller == FIXED:
                    self._signal_states[jid] = signals.initial_state(junc.signal)
                else:
                    self._signal_states[jid] = signals.SignalState()

        for trip in trips:
            for lid in (trip.origin_lane, trip.dest_lane):
                if lid >= n_lanes or self._kind[lid] != ROAD:
                    raise InputError(f"trip {trip.id}: lane {lid} is not a road lane")
            if not 0.0 <= trip.origin_s <= self._len[trip.origin_lane]:
                raise InputError(f"trip {trip.id}: origin_s outside its lane")
            if trip.departure < 0:
                raise InputError(f"trip {trip.id}: negative departure")
        self.total_trips = len(trips)
        length = config.vehicle_length
        self._pending = [Vehicle(t, length) for t in
                         sorted(trips, key=lambda t: (t.departure, t.id))]
        self._pend_i = 0
        self._retry: list[Vehicle] = []
        self._driving: dict[int, Vehicle] = {}
        self._all: dict[int, Vehicle] = {v.id: v for v in self._pending}
        if len(self._all) != len(trips):
            raise InputError("duplicate trip ids")
        self.finished: list[tuple[int, float, float]] = []
        self.dropped = 0
        self.vehicle_updates = 0
        self._step_no = 0
        self._index: dict[int, list[Vehicle]] = {}
        # (road id, window index) -> [speed sum, sample count]
        self._speed_acc: dict[tuple[str, int], list[float]] = {}
        self._executor: ThreadPoolExecutor | None = None

    # ------------------------------------------------------------------
    # phase 1: index + snapshot

    def prepare(self) -> tuple[dict[int, list[int]], dict[int, tuple[int, float, float]]]:
        """Freeze the snapshot and rebuild the per-lane index.

        Returns (lane id -> vehicle ids front-first, vehicle id -> (lane, s, v))
        as a read-only view; the engine keeps its own internal structures.
        """
        self._build_index()
        index_view = {
            lid: [veh.id for veh in lst] for lid, lst in self._index.items()
        }
        snapshot = {
            veh.id: (veh.snap_lane, veh.snap_s, veh.snap_v)
            for veh in self._driving.values()
        }
        return index_view, snapshot

    def _build_index(self) -> None:
        index: dict[int, list[Vehicle]] = {}
        for vid in sorted(self._driving):
            veh = self._driving[vid]
            veh.snap_lane = veh.lane_id
            veh.snap_s = veh.s
            veh.snap_v = veh.v
            veh.snap_ri = veh.route_index
            veh.snap_rp = veh.road_pos
            veh.reverted = False
            index.setdefault(veh.lane_id, []).append(veh)
        for lst in index.values():
            lst.sort(key=lambda x: (-x.snap_s, x.id))
            for pos, veh in enumerate(lst):
                veh.idx_pos = pos
        self._index = index

    # ------------------------------------------------------------------
    # sensing

    def _connector_aspect(self, conn: int) -> str:
        jid = self._junction_of[conn]
        junc = self.net.junctions[jid]
        state = self._signal_states.get(jid)
        return signals.connector_state(
            junc.signal, state, conn, self.config.amber,
            timed=self.config.controller == FIXED,
        )

    def _next_connector(self, lane: int, rp: int, roads_seq: list[str]) -> int | None:
        if rp + 1 >= len(roads_seq):
            return None
        return self._conn_from.get((lane, roads_seq[rp + 1]))

    def _sense(self, veh: Vehicle, lane: int, s: float, v: float) -> tuple[float, float]:
        """Effective (gap, leader speed) ahead of position s on `lane`.

        The effective leader is the nearer of the physical leader within the
        lookahead horizon (scanning successive route lanes) and a stationary
        stop line at the lane end when the next connector is red (or amber
        with enough distance left to brake comfortably).
        """
        cfg = self.config
        lst = self._index.get(lane)
        if lst:
            if lane == veh.snap_lane:
                pos = veh.idx_pos
                leader = lst[pos - 1] if pos > 0 else None
            else:
                leader = None
                for cand in reversed(lst):  # rear-first
                    if cand.snap_s > s or (cand.snap_s == s and cand.id < veh.id):
                        leader = cand
                        break
            if leader is not None:
                return max(leader.snap_s - leader.length - s, _EPS_GAP), leader.snap_v

        remaining = self._len[lane] - s
        rp = veh.snap_rp
        if self._kind[lane] == ROAD:
            if rp + 1 >= len(veh.roads_seq):
                return math.inf, 0.0  # final road: free run to arrival
            conn = self._next_connector(lane, rp, veh.roads_seq)
            if conn is None or not self._open[conn] or not self._open[self._succ1[conn]]:
                return max(remaining, _EPS_GAP), 0.0  # dead end until rerouted
            aspect = self._connector_aspect(conn)
            if aspect == signals.RED:
                return max(remaining, _EPS_GAP), 0.0
            if aspect == signals.AMBER and remaining > v * v / (2.0 * cfg.idm.b):
                return max(remaining, _EPS_GAP), 0.0

        cur, cur_rp = lane, rp
        dist = remaining
        while dist < cfg.lookahead:
            if self._kind[cur] == ROAD:
                nxt = self._next_connector(cur, cur_rp, veh.roads_seq)
                if nxt is None or not self._open[nxt]:
                    break
            else:
                nxt = self._succ1[cur]
                cur_rp += 1
                if not self._open[nxt]:
                    break
            occupants = self._index.get(nxt)
            if occupants:
                rear = occupants[-1]
                gap = dist + rear.snap_s - rear.length
                return max(gap, _EPS_GAP), rear.snap_v
            dist += self._len[nxt]
            cur = nxt
        return math.inf, 0.0

    def _neighbor_views(self, lane: int, s_t: float):
        """(leader, follower) VehicleViews around position s_t on `lane`."""
        lst = self._index.get(lane)
        if not lst:
            return None, None
        leader = follower = None
        for cand in lst:  # front-first
            if cand.snap_s > s_t:
                leader = cand
            else:
                follower = cand
                break
        mk = lambda c: None if c is None else VehicleView(c.snap_s, c.snap_v, c.length)
        return mk(leader), mk(follower)

    # ------------------------------------------------------------------
    # phase 2: per-vehicle update

    def _feasible_lanes(self, veh: Vehicle, lane: int) -> tuple[int, ...] | None:
        """Lanes of the current road that can continue the route; None = any."""
        rp = veh.snap_rp
        if rp + 1 >= len(veh.roads_seq):
            return None  # arrival road: every lane reaches the end
        return self._feasible.get((self._parent[lane], veh.roads_seq[rp + 1]), ())

    def _consider_change(self, veh: Vehicle) -> tuple[int, float] | None:
        """Returns (target lane, mapped s) if the vehicle changes lane."""
        cfg = self.config
        lane = veh.snap_lane
        if self._kind[lane] != ROAD:
            return None
        left, right = self._left[lane], self._right[lane]
        if left is None and right is None:
            return None
        feasible = self._feasible_lanes(veh, lane)
        mandatory = feasible is not None and lane not in feasible
        if mandatory:
            below = [f for f in feasible if f < lane]
            above = [f for f in feasible if f > lane]
            d_left = lane - max(below) if below else math.inf
            d_right = min(above) - lane if above else math.inf
            sides = [left if d_left <= d_right else right]
        else:
            draw = keyed_uniform(self.seed, STREAM_MOBIL, veh.id, self._step_no)
            if draw >= cfg.mobil.eval_prob:
                return None
            sides = [left, right]

        s, v = veh.snap_s, veh.snap_v
        lst = self._index.get(lane, [])
        pos = veh.idx_pos
        cur_leader = lst[pos - 1] if pos > 0 else None
        cur_follower = lst[pos + 1] if pos + 1 < len(lst) else None
        mk = lambda c: None if c is None else VehicleView(c.snap_s, c.snap_v, c.length)
        me = VehicleView(s, v, veh.length)

        best: tuple[float, int, float] | None = None
        for nb in sides:
            if nb is None or not self._open[nb]:
                continue
            if not mandatory and feasible is not None and nb not in feasible:
                continue
            s_t = s * (self._len[nb] / self._len[lane])
            tgt_leader, tgt_follower = self._neighbor_views(nb, s_t)
            ok, incentive = evaluate_change(
                me, mk(cur_leader), mk(cur_follower), tgt_leader, tgt_follower,
                s_t, cfg.mobil, cfg.idm, self._cap[lane], self._cap[nb],
            )
            if not ok:
                continue
            if not mandatory and incentive <= cfg.mobil.threshold:
                continue
            if best is None or incentive > best[0] or (
                incentive == best[0] and nb < best[1]
            ):
                best = (incentive, nb, s_t)
        if best is None:
            return None
        return best[1], best[2]

    def _update_vehicle(self, veh: Vehicle) -> None:
        cfg = self.config
        lane, s, v = veh.snap_lane, veh.snap_s, veh.snap_v
        changed = self._consider_change(veh)
        if changed is not None:
            lane, s = changed
        gap, lead_v = self._sense(veh, lane, s, v)
        a = idm_accel(v, v - lead_v, gap, cfg.idm, self._cap[lane])
        dt = cfg.dt
        v_new = v + a * dt
        if v_new <= 0.0:
            v_new = 0.0
            disp = v * v / (2.0 * -a) if a < 0.0 else 0.0
        else:
            disp = v * dt + 0.5 * a * dt * dt
            if disp < 0.0:
                disp = 0.0
        veh.d_lane = lane
        veh.d_s = s + disp
        veh.d_v = v_new
        veh.d_changed = changed is not None

    def _update_chunk(self, chunk: list[Vehicle]) -> None:
        for veh in chunk:
            self._update_vehicle(veh)

    # ------------------------------------------------------------------
    # phase 3: commit

    def _patch_route(self, veh: Vehicle, ri: int, lane: int) -> None:
        if ri < len(veh.route):
            veh.route[ri] = lane
        else:
            veh.route.append(lane)

    def _reroute(self, veh: Vehicle, lane: int) -> bool:
        try:
            path = self.router.route(lane, veh.dest_lane)
        except NoRouteError:
            return False
        veh.route = veh.route[: veh.route_index] + path
        veh.roads_seq = veh.roads_seq[: veh.road_pos] + roads_of_route(self.net, path)
        return True

    def _apply_deltas(self) -> int:
        """Lane transitions with red clamping; returns finished count."""
        finished_now = 0
        new_time = self.time + self.config.dt
        for vid in sorted(self._driving):
            veh = self._driving[vid]
            lane, s, v = veh.d_lane, veh.d_s, veh.d_v
            ri = veh.route_index
            if veh.d_changed:
                self._patch_route(veh, ri, lane)
            arrived = False
            while s > self._len[lane]:
                if self._kind[lane] == ROAD:
                    if veh.road_pos + 1 >= len(veh.roads_seq):
                        arrived = True
                        break
                    conn = self._next_connector(lane, veh.road_pos, veh.roads_seq)
                    if conn is not None and (
                        not self._open[conn] or not self._open[self._succ1[conn]]
                    ):
                        if self._reroute(veh, lane):
                            if veh.road_pos + 1 >= len(veh.roads_seq):
                                arrived = True
                                break
                            conn = self._next_connector(lane, veh.road_pos, veh.roads_seq)
                        else:
                            conn = None
                    if conn is None:
                        s = self._len[lane]
                        v = 0.0
                        break
                    if self._connector_aspect(conn) == signals.RED:
                        s = self._len[lane]
                        v = 0.0
                        break
                    s -= self._len[lane]
                    lane = conn
                    ri += 1
                    self._patch_route(veh, ri, lane)
                else:
                    s -= self._len[lane]
                    lane = self._succ1[lane]
                    veh.road_pos += 1
                    ri += 1
                    self._patch_route(veh, ri, lane)
            if arrived:
                veh.status = FINISHED
                veh.finish_time = new_time
                self.finished.append((vid, veh.depart_time, new_time))
                del self._driving[vid]
                finished_now += 1
                continue
            veh.lane_id = lane
            veh.s = s
            veh.v = v
            veh.route_index = ri
        return finished_now

    def _revert(self, veh: Vehicle) -> None:
        veh.lane_id = veh.snap_lane
        veh.s = veh.snap_s
        veh.v = 0.0
        veh.route_index = veh.snap_ri
        veh.road_pos = veh.snap_rp
        veh.reverted = True

    def _collision_sweep(self) -> None:
        """Enforce the post-integration bumper floor, front to back.

        Vehicles that stayed on their snapshot lane are never pushed behind
        their snapshot position; vehicles that entered a lane this step and
        cannot fit are reverted to their snapshot state (speed zeroed).
        """
        floor = self.config.s0_floor
        dt = self.config.dt
        for _ in range(len(self._driving) + 2):
            groups: dict[int, list[Vehicle]] = {}
            for vid in sorted(self._driving):
                veh = self._driving[vid]
                groups.setdefault(veh.lane_id, []).append(veh)
            dirty = False
            for lid in sorted(groups):
                lst = groups[lid]
                lst.sort(key=lambda x: (-x.s, x.id))
                prev: Vehicle | None = None
                prev_rear = math.inf
                for veh in lst:
                    limit = prev_rear - floor
                    if veh.s > limit + 1e-12:
                        entered = veh.lane_id != veh.snap_lane
                        floor_s = 0.0 if entered else veh.snap_s
                        if limit >= floor_s:
                            veh.v = max(0.0, min(veh.v, veh.v - (veh.s - limit) / dt))
                            veh.s = limit
                        elif entered and not veh.reverted:
                            self._revert(veh)
                            dirty = True
                            break
                        elif (
                            prev is not None
                            and prev.lane_id != prev.snap_lane
                            and not prev.reverted
                        ):
                            self._revert(prev)
                            dirty = True
                            break
                        else:
                            # hold at the snapshot position; the pre-step gap
                            # invariant bounds the residual overlap
                            veh.v = 0.0
                            veh.s = floor_s
                    prev = veh
                    prev_rear = veh.s - veh.length
                if dirty:
                    break
            if not dirty:
                return

    def _inject_due(self) -> int:
        due = self._retry
        self._retry = []
        while self._pend_i < len(self._pending) and (
            self._pending[self._pend_i].depart_time <= self.time
        ):
            due.append(self._pending[self._pend_i])
            self._pend_i += 1
        if not due:
            return 0

        occupants: dict[int, list[Vehicle]] = {}
        for veh in self._driving.values():
            occupants.setdefault(veh.lane_id, []).append(veh)
        for lst in occupants.values():
            lst.sort(key=lambda x: x.s)

        injected = 0
        s0 = self.config.idm.s0
        for veh in due:
            if not veh.route:
                if not self._open[veh.lane_id]:
                    self._retry.append(veh)
                    continue
                try:
                    veh.route = self.router.route(veh.lane_id, veh.dest_lane)
                except NoRouteError:
                    self.dropped += 1
                    veh.status = DROPPED
                    continue
                veh.roads_seq = roads_of_route(self.net, veh.route)
            lst = occupants.setdefault(veh.lane_id, [])
            front_gap = math.inf
            rear_gap = math.inf
            for other in lst:
                if other.s >= veh.origin_s:
                    front_gap = other.s - other.length - veh.origin_s
                    break
                rear_gap = veh.origin_s - veh.length - other.s
            if front_gap < s0 + veh.length or rear_gap < s0:
                self._retry.append(veh)
                continue
            veh.status = DRIVING
            veh.lane_id = veh.route[0]
            veh.s = veh.origin_s
            veh.v = 0.0
            veh.route_index = 0
            veh.road_pos = 0
            veh.snap_lane = veh.lane_id
            veh.snap_s = veh.s
            self._driving[veh.id] = veh
            lo = 0
            while lo < len(lst) and lst[lo].s < veh.s:
                lo += 1
            lst.insert(lo, veh)
            injected += 1
        return injected

    def _advance_signals(self) -> None:
        cfg = self.config
        if cfg.controller == FIXED:
            for jid in sorted(self._signal_states):
                signals.advance_fixed(
                    self._signal_states[jid], self.net.junctions[jid].signal, cfg.dt
                )
            return
        lane_counts: dict[int, int] | None = None
        for jid in sorted(self._signal_states):
            state = self._signal_states[jid]
            state.elapsed += cfg.dt
            state.since_decision += cfg.dt
            if state.since_decision < cfg.mp_interval or state.elapsed < cfg.mp_min_green:
                continue
            if lane_counts is None:
                lane_counts = {}
                for veh in self._driving.values():
                    lane_counts[veh.lane_id] = lane_counts.get(veh.lane_id, 0) + 1
            junc = self.net.junctions[jid]
            choice = signals.max_pressure_phase(
                junc, junc.signal, lane_counts,
                {c: self._pred1[c] for c in junc.connectors},
                {c: self._succ1[c] for c in junc.connectors},
            )
            if choice != state.phase:
                state.phase = choice
                state.elapsed = 0.0
            state.since_decision = 0.0

    def _accumulate_speeds(self, new_time: float) -> None:
        wi = int(new_time / self.config.speed_window)
        for veh in self._driving.values():
            lid = veh.lane_id
            if self._kind[lid] != ROAD:
                continue
            acc = self._speed_acc.setdefault((self._parent[lid], wi), [0.0, 0])
            acc[0] += veh.v
            acc[1] += 1

    def step(self) -> StepReport:
        cfg = self.config
        self._build_index()
        order = [self._driving[vid] for vid in sorted(self._driving)]
        self.vehicle_updates += len(order)
        if cfg.threads > 1 and len(order) > 1:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=cfg.threads)
            chunk = (len(order) + cfg.threads - 1) // cfg.threads
            chunks = [order[i : i + chunk] for i in range(0, len(order), chunk)]
            list(self._executor.map(self._update_chunk, chunks))
        else:
            for veh in order:
                self._update_vehicle(veh)

        finished_now = self._apply_deltas()
        self._collision_sweep()
        self._advance_signals()
        self.time += cfg.dt
        self._step_no += 1
        injected_now = self._inject_due()
        self._accumulate_speeds(self.time)
        return StepReport(
            time=self.time,
            driving=len(self._driving),
            waiting=self.waiting_count(),
            finished=len(self.finished),
            dropped=self.dropped,
            injected_now=injected_now,
            finished_now=finished_now,
        )

    # ------------------------------------------------------------------
    # observation and control surface

    def min_front_gap(self) -> float:
        """Smallest bumper-to-bumper gap over all lanes (inf when unique)."""
        groups: dict[int, list[Vehicle]] = {}
        for veh in self._driving.values():
            groups.setdefault(veh.lane_id, []).append(veh)
        worst = math.inf
        for lst in groups.values():
            lst.sort(key=lambda x: (-x.s, x.id))
            for lead, follow in zip(lst, lst[1:]):
                worst = min(worst, lead.s - lead.length - follow.s)
        return worst

    def get_vehicle(self, vehicle_id: int) -> StatusView:
        veh = self._all.get(vehicle_id)
        if veh is None:
            raise InputError(f"unknown vehicle {vehicle_id}")
        return StatusView(
            id=veh.id, lane_id=veh.lane_id, s=veh.s, v=veh.v, status=veh.status,
            route_index=veh.route_index, depart_time=veh.depart_time,
            finish_time=veh.finish_time,
        )

    def set_lane_max_speed(self, lane_id: int, max_speed: float) -> None:
        if lane_id not in self.net.lanes:
            raise InputError(f"unknown lane {lane_id}")
        if max_speed <= 0:
            raise InputError("max_speed must be positive")
        self.net.lanes[lane_id].max_speed = max_speed
        self._cap[lane_id] = max_speed
        self.router.rebuild()

    def set_lane_restriction(self, lane_id: int, restriction: str) -> None:
        if lane_id not in self.net.lanes:
            raise InputError(f"unknown lane {lane_id}")
        if restriction not in (OPEN, "closed"):
            raise InputError(f"unknown restriction {restriction!r}")
        self.net.lanes[lane_id].restriction = restriction
        self._open[lane_id] = restriction == OPEN
        self.router.rebuild()

    def set_signal_phase(self, junction_id: str, phase_index: int) -> None:
        junc = self.net.junctions.get(junction_id)
        if junc is None:
            raise InputError(f"unknown junction {junction_id}")
        if junc.signal is None:
            raise InputError(f"junction {junction_id} is unsignalized")
        signals.set_phase(junc.signal, self._signal_states[junction_id], phase_index)

    def road_free_flow(self, road_id: str) -> float:
        lids = self.net.roads[road_id]
        return sum(self._cap[lid] for lid in lids) / len(lids)

    def get_road_speed(self, road_id: str, window: tuple[float, float]) -> float:
        """Mean recorded speed on a road over [t0, t1); free-flow if empty."""
        if road_id not in self.net.roads:
            raise InputError(f"unknown road {road_id}")
        t0, t1 = window
        w = self.config.speed_window
        total = 0.0
        count = 0
        for wi in range(int(t0 // w), int(math.ceil(t1 / w))):
            acc = self._speed_acc.get((road_id, wi))
            if acc is not None:
                total += acc[0]
                count += int(acc[1])
        if count == 0:
            return self.road_free_flow(road_id)
        return total / count

    def waiting_count(self) -> int:
        return len(self._pending) - self._pend_i + len(self._retry)

    def driving_count(self) -> int:
        return len(self._driving)

    # ------------------------------------------------------------------

    def record_step(self, recorder) -> None:
        """Emit one VehicleRecord per driving vehicle, sorted by id."""
        t = self.time
        for vid in sorted(self._driving):
            veh = self._driving[vid]
            lid = veh.lane_id
            angle = geometry.heading_deg_at(
                self._line[lid], self._cum[lid], min(veh.s, self._len[lid])
            )
            recorder.write(
                VehicleRecord(t=t, id=vid, lane=lid, s=veh.s, v=veh.v, angle_deg=angle)
            )

    def road_windows(self, horizon: float) -> list[RoadWindow]:
        """Per-road windowed mean speeds over [0, horizon), free-flow filled."""
        w = self.config.speed_window
        n_windows = max(1, int(math.ceil(horizon / w - 1e-9)))
        out: list[RoadWindow] = []
        for rid in sorted(self.net.roads):
            for wi in range(n_windows):
                acc = self._speed_acc.get((rid, wi))
                if acc is None or acc[1] == 0:
                    speed = self.road_free_flow(rid)
                else:
                    speed = acc[0] / acc[1]
                out.append(
                    RoadWindow(
                        road=rid,
                        window_start=wi * w,
                        window_end=min((wi + 1) * w, horizon),
                        mean_speed=speed,
                    )
                )
        return out

    def run(self, steps: int, recorder=None) -> SimulationOutput:
        if steps < 0:
            raise InputError("steps must be non-negative")
        start_updates = self.vehicle_updates
        for _ in range(steps):
            self.step()
            if recorder is not None:
                self.record_step(recorder)
        horizon = steps * self.config.dt
        return SimulationOutput(
            steps=steps,
            dt=self.config.dt,
            finished=list(self.finished),
            driving_at_end=len(self._driving),
            unserved=self.waiting_count(),
            dropped=self.dropped,
            total_trips=self.total_trips,
            road_windows=self.road_windows(horizon) if steps else [],
            vehicle_updates=self.vehicle_updates - start_updates,
        )

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None


def run(world: World, steps: int, recorder=None) -> SimulationOutput:
    return world.run(steps, recorder)
