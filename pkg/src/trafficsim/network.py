"""Road-network compilation.

Raw feature collections (GeoJSON-compatible) are parsed into roads and
junctions, then compiled into a lane-level graph: every road becomes a set
of parallel lanes, every junction gets connector lanes joining incoming to
outgoing lanes according to a signed-angle turn rule, and junctions with
enough approaches get a fixed-time signal program.

Synthetic Manhattan grids for benchmarks are generated through the same
compiler so they satisfy the same invariants.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from . import geometry
from .errors import BuildError, InputError, ParseError, SchemaError

log = logging.getLogger("trafficsim.network")

Point = tuple[float, float]

ROAD = "road"
CONNECTOR = "connector"
OPEN = "open"
CLOSED = "closed"

STRAIGHT = "straight"
LEFT = "left"
RIGHT = "right"
UTURN = "uturn"

_ROAD_PROPS = {"id", "lanes", "max_speed"}
_JUNCTION_PROPS = {"id", "in_roads", "out_roads"}


@dataclass
class RawRoad:
    id: str
    polyline: list[Point]
    lane_count: int
    max_speed: float


@dataclass
class RawJunction:
    id: str
    in_roads: list[str]
    out_roads: list[str]
    position: Point


@dataclass
class Lane:
    id: int
    parent: str
    kind: str  # ROAD or CONNECTOR
    centerline: list[Point]
    length: float
    max_speed: float
    predecessors: list[int] = field(default_factory=list)
    successors: list[int] = field(default_factory=list)
    restriction: str = OPEN
    turn: str | None = None  # connectors only
    left: int | None = None  # same-road lateral neighbors
    right: int | None = None


@dataclass
class SignalPhase:
    duration: float
    green: tuple[int, ...]


@dataclass
class SignalProgram:
    phases: list[SignalPhase]
    offset: float = 0.0

    def cycle(self) -> float:
        return sum(p.duration for p in self.phases)


@dataclass
class Junction:
    id: str
    position: Point
    connectors: list[int] = field(default_factory=list)
    signal: SignalProgram | None = None


@dataclass
class RoadNetwork:
    lanes: dict[int, Lane]
    roads: dict[str, list[int]]  # lane ids, leftmost first
    junctions: dict[str, Junction]
    zone_hint: dict[int, int] | None = None

    def lane(self, lane_id: int) -> Lane:
        return self.lanes[lane_id]

    def road_lane_ids(self) -> list[int]:
        return [lid for lids in self.roads.values() for lid in lids]

    def road_of(self, lane_id: int) -> str:
        lane = self.lanes[lane_id]
        if lane.kind != ROAD:
            raise InputError(f"lane {lane_id} is not a road lane")
        return lane.parent


@dataclass
class BuildOptions:
    lane_width: float = 3.5
    snap_radius: float = 5.0
    allow_boundaries: bool = True
    allow_uturns: bool = False
    coordinate_frame: str = "auto"  # auto | local | geographic
    green_duration: float = 30.0
    clearance_duration: float = 3.0
    signal_min_approaches: int = 3


@dataclass
class Issue:
    entity: str
    kind: str
    message: str


# ---------------------------------------------------------------------------
# parsing


def _feature_label(feature: dict, index: int) -> str:
    props = feature.get("properties") or {}
    fid = props.get("id")
    return f"feature #{index}" if fid is None else f"feature {fid!r} (#{index})"


def _check_polyline(points, label: str) -> list[Point]:
    if not isinstance(points, list) or len(points) < 2:
        raise SchemaError(f"{label}: LineString needs at least 2 points")
    out: list[Point] = []
    for p in points:
        if not isinstance(p, (list, tuple)) or len(p) < 2:
            raise SchemaError(f"{label}: bad coordinate {p!r}")
        out.append((float(p[0]), float(p[1])))
    for a, b in zip(out, out[1:]):
        if a == b:
            raise SchemaError(f"{label}: consecutive duplicate point {a}")
    return out


def parse_raw(document: str | bytes) -> tuple[list[RawRoad], list[RawJunction]]:
    """Parse a raw feature-collection document into roads and junctions.

    Road features are LineStrings with properties {id, lanes, max_speed};
    junction features are Points with properties {id, in_roads, out_roads}.
    Unknown properties are ignored with a warning.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"malformed document at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise SchemaError("document root must be an object")
    if "schema_name" in doc and doc["schema_name"] != "raw-network":
        raise SchemaError(
            f"unexpected schema {doc['schema_name']!r}, wanted 'raw-network'"
        )
    if "schema_version" in doc and doc["schema_version"] != 1:
        raise SchemaError(
            f"raw-network schema_version {doc['schema_version']!r} unsupported (supported: 1)"
        )
    features = doc.get("features")
    if not isinstance(features, list):
        raise SchemaError("document has no 'features' list")
    if not features:
        log.warning("feature collection is empty")
        return [], []

    roads: list[RawRoad] = []
    junctions: list[RawJunction] = []
    seen_ids: set[str] = set()
    for index, feature in enumerate(features):
        label = _feature_label(feature, index)
        if not isinstance(feature, dict):
            raise SchemaError(f"{label}: feature must be an object")
        geom = feature.get("geometry")
        props = feature.get("properties")
        if not isinstance(geom, dict) or not isinstance(props, dict):
            raise SchemaError(f"{label}: missing geometry or properties")
        gtype = geom.get("type")
        fid = props.get("id")
        if fid is None:
            raise SchemaError(f"{label}: missing required property 'id'")
        fid = str(fid)
        if fid in seen_ids:
            raise SchemaError(f"{label}: duplicate id {fid!r}")
        seen_ids.add(fid)

        if gtype == "LineString":
            unknown = set(props) - _ROAD_PROPS
            if unknown:
                log.warning("road %s: ignoring unknown properties %s", fid, sorted(unknown))
            if "lanes" not in props:
                raise SchemaError(f"road {fid!r}: missing required property 'lanes'")
            if "max_speed" not in props:
                raise SchemaError(f"road {fid!r}: missing required property 'max_speed'")
            lanes = props["lanes"]
            speed = props["max_speed"]
            if not isinstance(lanes, int) or lanes < 1:
                raise SchemaError(f"road {fid!r}: 'lanes' must be a positive integer")
            if not isinstance(speed, (int, float)) or speed <= 0:
                raise SchemaError(f"road {fid!r}: 'max_speed' must be positive")
            pts = _check_polyline(geom.get("coordinates"), f"road {fid!r}")
            roads.append(RawRoad(fid, pts, lanes, float(speed)))
        elif gtype == "Point":
            unknown = set(props) - _JUNCTION_PROPS
            if unknown:
                log.warning(
                    "junction %s: ignoring unknown properties %s", fid, sorted(unknown)
                )
            coords = geom.get("coordinates")
            if not isinstance(coords, (list, tuple)) or len(coords) < 2:
                raise SchemaError(f"junction {fid!r}: bad Point coordinates")
            in_roads = props.get("in_roads")
            out_roads = props.get("out_roads")
            if not isinstance(in_roads, list) or not isinstance(out_roads, list):
                raise SchemaError(
                    f"junction {fid!r}: 'in_roads' and 'out_roads' must be lists"
                )
            junctions.append(
                RawJunction(
                    fid,
                    [str(r) for r in in_roads],
                    [str(r) for r in out_roads],
                    (float(coords[0]), float(coords[1])),
                )
            )
        else:
            raise SchemaError(f"{label}: unsupported geometry type {gtype!r}")

    road_ids = {r.id for r in roads}
    for junc in junctions:
        for rid in junc.in_roads + junc.out_roads:
            if rid not in road_ids:
                raise SchemaError(f"junction {junc.id!r}: references missing road {rid!r}")
    return roads, junctions


# ---------------------------------------------------------------------------
# compilation


def _turn_class(heading_in: float, heading_out: float) -> str:
    theta = (heading_out - heading_in + 180.0) % 360.0 - 180.0
    # theta > 0 is clockwise, i.e. a right turn
    if abs(theta) < 30.0:
        return STRAIGHT
    if 30.0 <= theta < 150.0:
        return RIGHT
    if -150.0 < theta <= -30.0:
        return LEFT
    return UTURN


def _lane_pairs(n_in: int, n_out: int, turn: str) -> list[tuple[int, int]]:
    """Indices of (incoming lane, outgoing lane) connected for a turn class.

    Lane index 0 is leftmost. Straight movements align by index, right turns
    use the rightmost lanes, left turns the leftmost.
    """
    if turn == STRAIGHT:
        return [(i, min(i, n_out - 1)) for i in range(n_in)]
    if turn == RIGHT:
        return [(n_in - 1, n_out - 1)]
    if turn in (LEFT, UTURN):
        return [(0, 0)]
    raise ValueError(turn)


def _project_if_needed(
    roads: list[RawRoad], junctions: list[RawJunction], frame: str
) -> tuple[list[RawRoad], list[RawJunction]]:
    if frame == "local":
        return roads, junctions
    all_points = [r.polyline for r in roads] + [[j.position] for j in junctions]
    if frame == "auto":
        if not all(geometry.looks_geographic(pts) for pts in all_points):
            return roads, junctions
        if not all_points:
            return roads, junctions
    center = geometry.bbox_center(all_points)
    proj_roads = [
        RawRoad(r.id, geometry.project_azimuthal_equidistant(r.polyline, center),
                r.lane_count, r.max_speed)
        for r in roads
    ]
    proj_junctions = [
        RawJunction(
            j.id, list(j.in_roads), list(j.out_roads),
            geometry.project_azimuthal_equidistant([j.position], center)[0],
        )
        for j in junctions
    ]
    return proj_roads, proj_junctions


def _pair_approaches(in_roads: list[str], headings: dict[str, float]) -> list[list[str]]:
    """Group approaches so that near-opposing ones share signal phases."""
    groups: list[list[str]] = []
    unpaired = sorted(in_roads)
    while unpaired:
        a = unpaired.pop(0)
        partner = None
        for b in unpaired:
            diff = abs((headings[b] - headings[a] + 180.0) % 360.0 - 180.0)
            if diff >= 135.0:
                partner = b
                break
        if partner is None:
            groups.append([a])
        else:
            unpaired.remove(partner)
            groups.append([a, partner])
    return groups


def _default_signal_program(
    junction_connectors: list[Lane],
    in_roads: list[str],
    headings: dict[str, float],
    in_road_of: dict[int, str],
    options: BuildOptions,
) -> SignalProgram:
    duration = options.green_duration + options.clearance_duration
    phases: list[SignalPhase] = []
    for group in _pair_approaches(in_roads, headings):
        members = set(group)
        through = sorted(
            c.id for c in junction_connectors
            if in_road_of[c.id] in members and c.turn in (STRAIGHT, RIGHT)
        )
        turning = sorted(
            c.id for c in junction_connectors
            if in_road_of[c.id] in members and c.turn in (LEFT, UTURN)
        )
        if through:
            phases.append(SignalPhase(duration, tuple(through)))
        if turning:
            phases.append(SignalPhase(duration, tuple(turning)))
    if not phases:
        phases.append(SignalPhase(duration, tuple(sorted(c.id for c in junction_connectors))))
    return SignalProgram(phases=phases, offset=0.0)


def build_network(
    roads: list[RawRoad],
    junctions: list[RawJunction],
    options: BuildOptions | None = None,
) -> RoadNetwork:
    """Compile raw roads and junctions into a lane-level network.

    Every road expands to ``lane_count`` parallel lanes offset by
    ``lane_width``; every permitted (incoming lane, outgoing lane) pair of a
    junction gets a straight connector lane; junctions with at least
    ``signal_min_approaches`` incoming roads get a fixed signal program,
    smaller junctions stay unsignalized (always green).
    """
    options = options or BuildOptions()
    for road in roads:
        if road.lane_count < 1 or road.max_speed <= 0 or len(road.polyline) < 2:
            raise BuildError(f"road {road.id!r}: invalid raw fields")
    roads, junctions = _project_if_needed(roads, junctions, options.coordinate_frame)
    roads_by_id = {r.id: r for r in roads}

    # which junction claims each road end / start
    end_junction: dict[str, str] = {}
    start_junction: dict[str, str] = {}
    for junc in junctions:
        if not junc.in_roads or not junc.out_roads:
            raise BuildError(f"junction {junc.id!r}: needs both incoming and outgoing roads")
        for rid in junc.in_roads:
            road = roads_by_id[rid]
            if math.dist(road.polyline[-1], junc.position) > options.snap_radius:
                raise BuildError(
                    f"road {rid!r}: end point does not snap to junction {junc.id!r} "
                    f"within {options.snap_radius} m"
                )
            if end_junction.get(rid, junc.id) != junc.id:
                raise SchemaError(f"road {rid!r}: claimed as incoming by two junctions")
            end_junction[rid] = junc.id
        for rid in junc.out_roads:
            road = roads_by_id[rid]
            if math.dist(road.polyline[0], junc.position) > options.snap_radius:
                raise BuildError(
                    f"road {rid!r}: start point does not snap to junction {junc.id!r} "
                    f"within {options.snap_radius} m"
                )
            if start_junction.get(rid, junc.id) != junc.id:
                raise SchemaError(f"road {rid!r}: claimed as outgoing by two junctions")
            start_junction[rid] = junc.id

    if not options.allow_boundaries:
        for road in roads:
            if road.id not in end_junction or road.id not in start_junction:
                raise BuildError(f"road {road.id!r}: endpoint not attached to any junction")

    lanes: dict[int, Lane] = {}
    road_lanes: dict[str, list[int]] = {}
    next_id = 0
    for rid in sorted(roads_by_id):
        road = roads_by_id[rid]
        n = road.lane_count
        ids: list[int] = []
        for i in range(n):
            offset = (i + 0.5 - n / 2.0) * options.lane_width
            line = geometry.offset_polyline(road.polyline, offset)
            lanes[next_id] = Lane(
                id=next_id,
                parent=rid,
                kind=ROAD,
                centerline=line,
                length=geometry.polyline_length(line),
                max_speed=road.max_speed,
            )
            ids.append(next_id)
            next_id += 1
        for a, b in zip(ids, ids[1:]):
            lanes[a].right = b
            lanes[b].left = a
        road_lanes[rid] = ids

    headings_in: dict[str, float] = {}
    headings_out: dict[str, float] = {}
    for rid, road in roads_by_id.items():
        cum = geometry.cumulative_lengths(road.polyline)
        headings_in[rid] = geometry.heading_deg_at(road.polyline, cum, cum[-1])
        headings_out[rid] = geometry.heading_deg_at(road.polyline, cum, 0.0)

    net_junctions: dict[str, Junction] = {}
    for junc in sorted(junctions, key=lambda j: j.id):
        connectors: list[Lane] = []
        in_road_of: dict[int, str] = {}
        for in_rid in sorted(junc.in_roads):
            for out_rid in sorted(junc.out_roads):
                turn = _turn_class(headings_in[in_rid], headings_out[out_rid])
                if turn == UTURN and not options.allow_uturns:
                    continue
                in_ids = road_lanes[in_rid]
                out_ids = road_lanes[out_rid]
                for i, j in _lane_pairs(len(in_ids), len(out_ids), turn):
                    src = lanes[in_ids[i]]
                    dst = lanes[out_ids[j]]
                    line = [src.centerline[-1], dst.centerline[0]]
                    conn = Lane(
                        id=next_id,
                        parent=junc.id,
                        kind=CONNECTOR,
                        centerline=line,
                        length=geometry.polyline_length(line),
                        max_speed=min(src.max_speed, dst.max_speed),
                        predecessors=[src.id],
                        successors=[dst.id],
                        turn=turn,
                    )
                    lanes[next_id] = conn
                    src.successors.append(next_id)
                    dst.predecessors.append(next_id)
                    connectors.append(conn)
                    in_road_of[conn.id] = in_rid
                    next_id += 1
        if not connectors:
            raise BuildError(f"junction {junc.id!r}: no feasible connector")
        signal = None
        if len(junc.in_roads) >= options.signal_min_approaches:
            signal = _default_signal_program(
                connectors, junc.in_roads, headings_in, in_road_of, options
            )
        net_junctions[junc.id] = Junction(
            id=junc.id,
            position=junc.position,
            connectors=sorted(c.id for c in connectors),
            signal=signal,
        )

    for lane in lanes.values():
        lane.predecessors.sort()
        lane.successors.sort()
    return RoadNetwork(lanes=lanes, roads=road_lanes, junctions=net_junctions)


# ---------------------------------------------------------------------------
# synthetic grids


def generate_grid(
    rows: int,
    cols: int,
    block_length: float = 200.0,
    lanes_per_direction: int = 1,
    max_speed: float = 16.67,
) -> RoadNetwork:
    """Manhattan grid of rows x cols junctions with bidirectional roads on
    every lattice edge, compiled through :func:`build_network`.
    """
    if rows < 2 or cols < 2:
        raise InputError("grid needs rows >= 2 and cols >= 2")
    if block_length <= 0 or lanes_per_direction < 1 or max_speed <= 0:
        raise InputError("invalid grid parameters")

    margin = min(block_length / 4.0, 12.0)
    positions: dict[str, Point] = {}
    for r in range(rows):
        for c in range(cols):
            positions[f"j{r}_{c}"] = (c * block_length, r * block_length)

    raw_roads: list[RawRoad] = []
    in_roads: dict[str, list[str]] = {j: [] for j in positions}
    out_roads: dict[str, list[str]] = {j: [] for j in positions}

    def add_road(a: str, b: str) -> None:
        (ax, ay), (bx, by) = positions[a], positions[b]
        d = math.dist((ax, ay), (bx, by))
        ux, uy = (bx - ax) / d, (by - ay) / d
        line = [(ax + ux * margin, ay + uy * margin), (bx - ux * margin, by - uy * margin)]
        rid = f"{a}:{b}"
        raw_roads.append(RawRoad(rid, line, lanes_per_direction, max_speed))
        out_roads[a].append(rid)
        in_roads[b].append(rid)

    for r in range(rows):
        for c in range(cols):
            here = f"j{r}_{c}"
            if c + 1 < cols:
                there = f"j{r}_{c + 1}"
                add_road(here, there)
                add_road(there, here)
            if r + 1 < rows:
                there = f"j{r + 1}_{c}"
                add_road(here, there)
                add_road(there, here)

    raw_junctions = [
        RawJunction(j, in_roads[j], out_roads[j], positions[j]) for j in sorted(positions)
    ]
    options = BuildOptions(
        snap_radius=margin + 0.5, allow_boundaries=False, coordinate_frame="local"
    )
    return build_network(raw_roads, raw_junctions, options)


# ---------------------------------------------------------------------------
# validation


def validate_network(net: RoadNetwork) -> list[Issue]:
    """Check all structural invariants; returns an empty list for a valid net."""
    issues: list[Issue] = []

    def bad(entity: str, kind: str, message: str) -> None:
        issues.append(Issue(entity, kind, message))

    for lid, lane in net.lanes.items():
        name = f"lane {lid}"
        if lane.id != lid:
            bad(name, "id-mismatch", "key does not match lane.id")
        if lane.kind not in (ROAD, CONNECTOR):
            bad(name, "bad-kind", f"unknown kind {lane.kind!r}")
        if lane.restriction not in (OPEN, CLOSED):
            bad(name, "bad-restriction", f"unknown restriction {lane.restriction!r}")
        if abs(lane.length - geometry.polyline_length(lane.centerline)) > 1e-6:
            bad(name, "bad-length", "stored length differs from polyline arc length")
        if lane.max_speed <= 0:
            bad(name, "bad-speed", "max_speed must be positive")
        for other in lane.predecessors + lane.successors:
            if other not in net.lanes:
                bad(name, "dangling-ref", f"references missing lane {other}")
        for succ in lane.successors:
            if succ in net.lanes and lid not in net.lanes[succ].predecessors:
                bad(name, "asymmetric-topology", f"successor {succ} does not list it back")
        for pred in lane.predecessors:
            if pred in net.lanes and lid not in net.lanes[pred].successors:
                bad(name, "asymmetric-topology", f"predecessor {pred} does not list it back")
        if lane.kind == CONNECTOR:
            ok = (
                len(lane.predecessors) == 1
                and len(lane.successors) == 1
                and all(
                    net.lanes[x].kind == ROAD
                    for x in lane.predecessors + lane.successors
                    if x in net.lanes
                )
            )
            if not ok:
                bad(name, "bad-connector", "connector must join exactly one road lane pair")
        for side, other in (("left", lane.left), ("right", lane.right)):
            if other is None:
                continue
            if other not in net.lanes:
                bad(name, "bad-adjacency", f"{side} neighbor {other} missing")
                continue
            neighbor = net.lanes[other]
            back = neighbor.right if side == "left" else neighbor.left
            if back != lid:
                bad(name, "bad-adjacency", f"{side} adjacency with {other} not symmetric")
            if neighbor.parent != lane.parent or neighbor.kind != ROAD:
                bad(name, "bad-adjacency", f"{side} neighbor {other} is not a sibling lane")

    for rid, lids in net.roads.items():
        name = f"road {rid}"
        for lid in lids:
            if lid not in net.lanes:
                bad(name, "dangling-ref", f"road lists missing lane {lid}")
            elif net.lanes[lid].parent != rid or net.lanes[lid].kind != ROAD:
                bad(name, "bad-road", f"lane {lid} does not belong to this road")
        for a, b in zip(lids, lids[1:]):
            if a in net.lanes and b in net.lanes:
                if net.lanes[a].right != b or net.lanes[b].left != a:
                    bad(name, "missing-adjacency", f"lanes {a},{b} not recorded as neighbors")

    for jid, junc in net.junctions.items():
        name = f"junction {jid}"
        for cid in junc.connectors:
            if cid not in net.lanes:
                bad(name, "dangling-ref", f"junction lists missing connector {cid}")
            elif net.lanes[cid].kind != CONNECTOR or net.lanes[cid].parent != jid:
                bad(name, "bad-junction", f"lane {cid} is not a connector of this junction")
        if junc.signal is not None:
            greens: set[int] = set()
            for i, phase in enumerate(junc.signal.phases):
                if phase.duration <= 0:
                    bad(name, "bad-signal", f"phase {i} has non-positive duration")
                greens.update(phase.green)
                for cid in phase.green:
                    if cid not in junc.connectors:
                        bad(name, "bad-signal", f"phase {i} greens foreign lane {cid}")
            missing = set(junc.connectors) - greens
            if missing:
                bad(name, "bad-signal", f"connectors {sorted(missing)} never green")
    return issues
