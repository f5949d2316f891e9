"""On-disk schemas and round-trip serialization.

Every file is a single JSON document (the recorder stream is line-delimited
JSON) with a versioned header {schema_name, schema_version, producer}.
Serialization is canonical: sorted keys, compact separators, shortest float
repr. save followed by load is the identity on the in-memory value, and the
byte output is stable across runs and platforms.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .demand import ODMatrix, Trip, Zone
from .errors import ParseError, RecorderError, SchemaError
from .network import (
    Junction,
    Lane,
    RawJunction,
    RawRoad,
    RoadNetwork,
    SignalPhase,
    SignalProgram,
    parse_raw,
)

PRODUCER = "trafficsim"

SCHEMA_VERSIONS = {
    "raw-network": 1,
    "network": 1,
    "zones": 1,
    "od": 1,
    "trips": 1,
    "vehicle-records": 1,
    "road-speeds": 1,
    "report": 1,
    "manifest": 1,
    "bench": 1,
}


@dataclass(frozen=True)
class VehicleRecord:
    t: float
    id: int
    lane: int
    s: float
    v: float
    angle_deg: float


@dataclass(frozen=True)
class RoadWindow:
    road: str
    window_start: float
    window_end: float
    mean_speed: float


@dataclass
class Report:
    att: float | None
    att_penalized: float | None
    finished: int
    driving_at_end: int
    unserved: int
    total_trips: int
    road_speeds: list[RoadWindow] = field(default_factory=list)
    comparisons: dict[str, float] = field(default_factory=dict)


@dataclass
class RunManifest:
    command: list[str]
    config_hash: str
    seed: int | None
    schema_versions: dict[str, int]
    duration_s: float
    steps_per_s: float | None = None
    vehicle_updates_per_s: float | None = None


# ---------------------------------------------------------------------------
# canonical JSON plumbing


def canonical_json(obj) -> str:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _header(name: str) -> dict:
    return {
        "schema_name": name,
        "schema_version": SCHEMA_VERSIONS[name],
        "producer": PRODUCER,
    }


def check_header(doc: dict, name: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(f"{name}: document root must be an object")
    got = doc.get("schema_name")
    if got != name:
        raise SchemaError(f"expected schema {name!r}, got {got!r}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSIONS[name]:
        raise SchemaError(
            f"{name}: schema_version {version!r} unsupported "
            f"(supported: {SCHEMA_VERSIONS[name]})"
        )


def write_document(path, doc: dict) -> None:
    Path(path).write_text(canonical_json(doc) + "\n", encoding="utf-8")


def read_document(path, name: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: malformed document at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    check_header(doc, name)
    return doc


def _require(doc: dict, key: str, name: str):
    if key not in doc:
        raise SchemaError(f"{name}: missing field {key!r}")
    return doc[key]


# ---------------------------------------------------------------------------
# raw network


def save_raw_network(path, roads: list[RawRoad], junctions: list[RawJunction]) -> None:
    features = []
    for road in roads:
        features.append(
            {
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[x, y] for x, y in road.polyline],
                },
                "properties": {
                    "id": road.id,
                    "lanes": road.lane_count,
                    "max_speed": road.max_speed,
                },
                "type": "Feature",
            }
        )
    for junc in junctions:
        features.append(
            {
                "geometry": {"type": "Point", "coordinates": list(junc.position)},
                "properties": {
                    "id": junc.id,
                    "in_roads": junc.in_roads,
                    "out_roads": junc.out_roads,
                },
                "type": "Feature",
            }
        )
    doc = _header("raw-network")
    doc["type"] = "FeatureCollection"
    doc["features"] = features
    write_document(path, doc)


def load_raw_network(path) -> tuple[list[RawRoad], list[RawJunction]]:
    return parse_raw(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# compiled network


def _lane_to_json(lane: Lane) -> dict:
    return {
        "id": lane.id,
        "parent": lane.parent,
        "kind": lane.kind,
        "centerline": [[x, y] for x, y in lane.centerline],
        "length": lane.length,
        "max_speed": lane.max_speed,
        "predecessors": lane.predecessors,
        "successors": lane.successors,
        "restriction": lane.restriction,
        "turn": lane.turn,
        "left": lane.left,
        "right": lane.right,
    }


def _lane_from_json(obj: dict) -> Lane:
    return Lane(
        id=int(obj["id"]),
        parent=str(obj["parent"]),
        kind=str(obj["kind"]),
        centerline=[(float(x), float(y)) for x, y in obj["centerline"]],
        length=float(obj["length"]),
        max_speed=float(obj["max_speed"]),
        predecessors=[int(x) for x in obj["predecessors"]],
        successors=[int(x) for x in obj["successors"]],
        restriction=str(obj["restriction"]),
        turn=None if obj.get("turn") is None else str(obj["turn"]),
        left=None if obj.get("left") is None else int(obj["left"]),
        right=None if obj.get("right") is None else int(obj["right"]),
    )


def _junction_to_json(junc: Junction) -> dict:
    signal = None
    if junc.signal is not None:
        signal = {
            "offset": junc.signal.offset,
            "phases": [
                {"duration": p.duration, "green": list(p.green)}
                for p in junc.signal.phases
            ],
        }
    return {
        "id": junc.id,
        "position": list(junc.position),
        "connectors": junc.connectors,
        "signal": signal,
    }


def _junction_from_json(obj: dict) -> Junction:
    signal = None
    if obj.get("signal") is not None:
        sig = obj["signal"]
        signal = SignalProgram(
            phases=[
                SignalPhase(float(p["duration"]), tuple(int(g) for g in p["green"]))
                for p in sig["phases"]
            ],
            offset=float(sig.get("offset", 0.0)),
        )
    return Junction(
        id=str(obj["id"]),
        position=(float(obj["position"][0]), float(obj["position"][1])),
        connectors=[int(c) for c in obj["connectors"]],
        signal=signal,
    )


def save_network(path, net: RoadNetwork) -> None:
    doc = _header("network")
    doc["lanes"] = [_lane_to_json(net.lanes[lid]) for lid in sorted(net.lanes)]
    doc["roads"] = {rid: net.roads[rid] for rid in sorted(net.roads)}
    doc["junctions"] = [_junction_to_json(net.junctions[j]) for j in sorted(net.junctions)]
    doc["zone_hint"] = (
        None
        if net.zone_hint is None
        else {str(k): net.zone_hint[k] for k in sorted(net.zone_hint)}
    )
    write_document(path, doc)


def load_network(path) -> RoadNetwork:
    doc = read_document(path, "network")
    try:
        lanes = {}
        for obj in _require(doc, "lanes", "network"):
            lane = _lane_from_json(obj)
            lanes[lane.id] = lane
        roads = {
            str(rid): [int(x) for x in lids]
            for rid, lids in _require(doc, "roads", "network").items()
        }
        junctions = {}
        for obj in _require(doc, "junctions", "network"):
            junc = _junction_from_json(obj)
            junctions[junc.id] = junc
        hint = doc.get("zone_hint")
        zone_hint = None if hint is None else {int(k): int(v) for k, v in hint.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"network: malformed entity ({exc})") from None
    return RoadNetwork(lanes=lanes, roads=roads, junctions=junctions, zone_hint=zone_hint)


# ---------------------------------------------------------------------------
# zones / OD / trips


def _zone_to_json(zone: Zone) -> dict:
    return {
        "id": zone.id,
        "centroid": list(zone.centroid),
        "mass": zone.mass,
        "lanes": list(zone.lanes),
    }


def _zone_from_json(obj: dict) -> Zone:
    try:
        return Zone(
            id=int(obj["id"]),
            centroid=(float(obj["centroid"][0]), float(obj["centroid"][1])),
            mass=float(obj["mass"]),
            lanes=tuple(int(x) for x in obj["lanes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"zones: malformed zone ({exc})") from None


def save_zones(path, zones: list[Zone]) -> None:
    doc = _header("zones")
    doc["zones"] = [_zone_to_json(z) for z in zones]
    write_document(path, doc)


def load_zones(path) -> list[Zone]:
    doc = read_document(path, "zones")
    return [_zone_from_json(obj) for obj in _require(doc, "zones", "zones")]


def save_od(path, od: ODMatrix) -> None:
    doc = _header("od")
    doc["zones"] = [_zone_to_json(z) for z in od.zones]
    doc["counts"] = [[float(x) for x in row] for row in od.counts]
    write_document(path, doc)


def load_od(path) -> ODMatrix:
    doc = read_document(path, "od")
    zones = [_zone_from_json(obj) for obj in _require(doc, "zones", "od")]
    counts = np.array(_require(doc, "counts", "od"), dtype=float)
    n = len(zones)
    if counts.shape != (n, n):
        raise SchemaError(f"od: counts shape {counts.shape} does not match {n} zones")
    if (counts < 0).any():
        raise SchemaError("od: negative counts")
    return ODMatrix(zones=zones, counts=counts)


def save_trips(path, trips: list[Trip]) -> None:
    doc = _header("trips")
    doc["trips"] = [asdict(t) for t in trips]
    write_document(path, doc)


def load_trips(path) -> list[Trip]:
    doc = read_document(path, "trips")
    out = []
    for obj in _require(doc, "trips", "trips"):
        try:
            out.append(
                Trip(
                    id=int(obj["id"]),
                    origin_lane=int(obj["origin_lane"]),
                    origin_s=float(obj["origin_s"]),
                    dest_lane=int(obj["dest_lane"]),
                    departure=float(obj["departure"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"trips: malformed trip ({exc})") from None
    return out


# ---------------------------------------------------------------------------
# recorder stream (line-delimited)


def _record_line(r: VehicleRecord) -> str:
    # hand-built dict: asdict() is too slow for millions of records
    return canonical_json(
        {"angle_deg": r.angle_deg, "id": r.id, "lane": r.lane, "s": r.s, "t": r.t, "v": r.v}
    ) + "\n"


class JsonlRecorder:
    """Single-writer sink for per-step vehicle records.

    Writes one header line then one canonical JSON object per record; the
    caller must emit records sorted by (t, vehicle id).
    """

    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write(canonical_json(_header("vehicle-records")) + "\n")

    def write(self, record: VehicleRecord) -> None:
        try:
            self._fh.write(_record_line(record))
        except (OSError, ValueError) as exc:
            raise RecorderError(f"record write failed: {exc}") from None

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class HashingRecorder:
    """Sink that hashes the canonical byte stream instead of storing it."""

    def __init__(self):
        self._hash = hashlib.sha256()
        self.count = 0

    def write(self, record: VehicleRecord) -> None:
        self._hash.update(_record_line(record).encode("utf-8"))
        self.count += 1

    def hexdigest(self) -> str:
        return self._hash.hexdigest()


class CollectingRecorder:
    def __init__(self):
        self.records: list[VehicleRecord] = []

    def write(self, record: VehicleRecord) -> None:
        self.records.append(record)


def load_records(path) -> tuple[list[VehicleRecord], bool]:
    """Read a recorder stream; tolerates truncation at the last line.

    Returns (records, truncated). A missing or malformed header is an error;
    a malformed or incomplete final line sets the truncated flag.
    """
    records: list[VehicleRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise SchemaError("vehicle-records: empty stream")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise SchemaError("vehicle-records: malformed header line") from None
        check_header(header, "vehicle-records")
        truncated = False
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
                record = VehicleRecord(
                    t=float(obj["t"]),
                    id=int(obj["id"]),
                    lane=int(obj["lane"]),
                    s=float(obj["s"]),
                    v=float(obj["v"]),
                    angle_deg=float(obj["angle_deg"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                truncated = True
                break
            records.append(record)
    return records, truncated


def save_records(path, records: list[VehicleRecord]) -> None:
    with JsonlRecorder(path) as sink:
        for record in records:
            sink.write(record)


# ---------------------------------------------------------------------------
# road speeds / report / manifest


def save_road_speeds(path, windows: list[RoadWindow]) -> None:
    doc = _header("road-speeds")
    doc["windows"] = [asdict(w) for w in windows]
    write_document(path, doc)


def load_road_speeds(path) -> list[RoadWindow]:
    doc = read_document(path, "road-speeds")
    out = []
    for obj in _require(doc, "windows", "road-speeds"):
        try:
            out.append(
                RoadWindow(
                    road=str(obj["road"]),
                    window_start=float(obj["window_start"]),
                    window_end=float(obj["window_end"]),
                    mean_speed=float(obj["mean_speed"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"road-speeds: malformed window ({exc})") from None
    return out


def save_report(path, report: Report) -> None:
    doc = _header("report")
    doc["att"] = report.att
    doc["att_penalized"] = report.att_penalized
    doc["finished"] = report.finished
    doc["driving_at_end"] = report.driving_at_end
    doc["unserved"] = report.unserved
    doc["total_trips"] = report.total_trips
    doc["road_speeds"] = [asdict(w) for w in report.road_speeds]
    doc["comparisons"] = dict(sorted(report.comparisons.items()))
    write_document(path, doc)


def load_report(path) -> Report:
    doc = read_document(path, "report")
    try:
        return Report(
            att=None if doc["att"] is None else float(doc["att"]),
            att_penalized=(
                None if doc["att_penalized"] is None else float(doc["att_penalized"])
            ),
            finished=int(doc["finished"]),
            driving_at_end=int(doc["driving_at_end"]),
            unserved=int(doc["unserved"]),
            total_trips=int(doc["total_trips"]),
            road_speeds=[
                RoadWindow(
                    road=str(o["road"]),
                    window_start=float(o["window_start"]),
                    window_end=float(o["window_end"]),
                    mean_speed=float(o["mean_speed"]),
                )
                for o in doc["road_speeds"]
            ],
            comparisons={str(k): float(v) for k, v in doc["comparisons"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"report: malformed document ({exc})") from None


def save_manifest(path, manifest: RunManifest) -> None:
    doc = _header("manifest")
    doc.update(asdict(manifest))
    write_document(path, doc)


def load_manifest(path) -> RunManifest:
    doc = read_document(path, "manifest")
    try:
        return RunManifest(
            command=str(doc["command"]),
            config_hash=str(doc["config_hash"]),
            seed=None if doc["seed"] is None else int(doc["seed"]),
            schema_versions={str(k): int(v) for k, v in doc["schema_versions"].items()},
            duration_s=float(doc["duration_s"]),
            steps_per_s=(
                None if doc.get("steps_per_s") is None else float(doc["steps_per_s"])
            ),
            vehicle_updates_per_s=(
                None
                if doc.get("vehicle_updates_per_s") is None
                else float(doc["vehicle_updates_per_s"])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"manifest: malformed document ({exc})") from None
