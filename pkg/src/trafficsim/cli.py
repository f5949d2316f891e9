"""Command line interface.

Every subcommand reads and writes versioned JSON documents and drops a
run manifest next to its primary output, so a pipeline of invocations
is fully reproducible from the manifests alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import io as tio
from . import metrics
from .demand import DepartureProfile, gravity_od, od_to_trips, radiation_od, random_trips
from .engine import EngineConfig, FIXED, MAX_PRESSURE, World
from .errors import InputError, TrafficSimError
from .network import BuildOptions, build_network, generate_grid, validate_network

_REQUIRED = object()

# Per-command defaults. argparse itself never fills a value in, so a
# flag given on the command line can be told apart from one that came
# from --config or from this table.
_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "build-map": {
        "input": _REQUIRED,
        "output": _REQUIRED,
        "lane_width": 3.5,
        "snap_radius": 5.0,
        "allow_boundaries": True,
    },
    "gen-grid": {
        "rows": _REQUIRED,
        "cols": _REQUIRED,
        "block": 200.0,
        "lanes": 1,
        "speed": 16.67,
        "output": _REQUIRED,
    },
    "gen-od": {
        "net": _REQUIRED,
        "zones": _REQUIRED,
        "model": "gravity",
        "total": 100000.0,
        "gamma": 2.0,
        "output": _REQUIRED,
    },
    "gen-demand": {
        "od": _REQUIRED,
        "net": _REQUIRED,
        "profile": "uniform",
        "window": "0:3600",
        "peak": None,
        "mode_share": 1.0,
        "seed": 42,
        "output": _REQUIRED,
    },
    "simulate": {
        "net": _REQUIRED,
        "trips": _REQUIRED,
        "steps": 3600,
        "dt": 1.0,
        "controller": "fixed",
        "seed": 42,
        "record": None,
        "roads": None,
        "threads": None,
        "speed_window": 300.0,
    },
    "analyze": {
        "record": _REQUIRED,
        "roads": _REQUIRED,
        "trips": _REQUIRED,
        "compare_speeds": None,
        "compare_od": None,
        "report": _REQUIRED,
        "dt": 1.0,
        "horizon": None,
    },
    "bench": {
        "scenarios": "4x4:1000,4x4:2000",
        "steps": 600,
        "dt": 1.0,
        "repeats": 3,
        "threads": None,
        "seed": 42,
        "output": None,
    },
}

_CONTROLLERS = {"fixed": FIXED, "maxpressure": MAX_PRESSURE}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficsim",
        description="Deterministic microscopic traffic simulation toolchain.",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + _version())
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file supplying any flag of this command")
        p.add_argument("--manifest", help="manifest path (default: <output>.manifest.json)")
        return p

    p = add("build-map", "build a routable network from a raw road/junction file")
    p.add_argument("--input", help="raw network JSON")
    p.add_argument("--output", help="network JSON to write")
    p.add_argument("--lane-width", type=float, dest="lane_width")
    p.add_argument("--snap-radius", type=float, dest="snap_radius")
    p.add_argument(
        "--allow-boundaries",
        action=argparse.BooleanOptionalAction,
        dest="allow_boundaries",
        help="keep roads whose loose ends touch no junction",
    )

    p = add("gen-grid", "generate a synthetic grid network")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--block", type=float, help="block edge length in meters")
    p.add_argument("--lanes", type=int, help="lanes per direction")
    p.add_argument("--speed", type=float, help="lane speed limit in m/s")
    p.add_argument("--output")

    p = add("gen-od", "generate an OD matrix from zones")
    p.add_argument("--net", help="network JSON (zone lane references are checked)")
    p.add_argument("--zones", help="zones JSON")
    p.add_argument("--model", choices=["gravity", "radiation"])
    p.add_argument("--total", type=float, help="total trips to distribute")
    p.add_argument("--gamma", type=float, help="gravity distance exponent")
    p.add_argument("--output")

    p = add("gen-demand", "expand an OD matrix into individual trips")
    p.add_argument("--od", help="OD matrix JSON")
    p.add_argument("--net", help="network JSON")
    p.add_argument("--profile", choices=["uniform", "peaked"])
    p.add_argument("--window", help="departure window as START:END seconds")
    p.add_argument("--peak", help="peak profile as MEAN:STD seconds")
    p.add_argument("--mode-share", type=float, dest="mode_share")
    p.add_argument("--seed", type=int)
    p.add_argument("--output")

    p = add("simulate", "run the simulation")
    p.add_argument("--net")
    p.add_argument("--trips")
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--controller", choices=sorted(_CONTROLLERS))
    p.add_argument("--seed", type=int)
    p.add_argument("--record", help="vehicle record JSONL to write")
    p.add_argument("--roads", help="road speed table JSON to write")
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    p.add_argument("--speed-window", type=float, dest="speed_window")

    p = add("analyze", "compute metrics from simulation outputs")
    p.add_argument("--record", help="vehicle record JSONL")
    p.add_argument("--roads", help="road speed table JSON")
    p.add_argument("--trips", help="trips JSON the run was fed")
    p.add_argument("--compare-speeds", dest="compare_speeds", help="observed road speeds JSON")
    p.add_argument("--compare-od", dest="compare_od", help="observed OD JSON")
    p.add_argument("--report", help="report JSON to write")
    p.add_argument("--dt", type=float, help="step length used by the run")
    p.add_argument("--horizon", type=float, help="run horizon in seconds (default: last record time)")

    p = add("bench", "benchmark grid scenarios")
    p.add_argument("--scenarios", help="comma list of RxC:TRIPS entries")
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="optional JSON table to write")

    return parser


def _version() -> str:
    from . import __version__

    return __version__


def _resolve(command: str, given: Dict[str, Any]) -> Dict[str, Any]:
    """Merge command line flags, --config contents and defaults."""
    defaults = _DEFAULTS[command]
    merged = dict(defaults)
    config_path = given.pop("config", None)
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise InputError(f"config {config_path}: expected a JSON object")
        for key, value in loaded.items():
            dest = key.replace("-", "_")
            if dest not in defaults and dest != "manifest":
                raise InputError(f"config {config_path}: unknown flag {key!r} for {command}")
            merged[dest] = value
    merged.update(given)
    missing = sorted(k for k, v in merged.items() if v is _REQUIRED)
    if missing:
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise InputError(f"{command}: missing required flags: {flags}")
    return merged


def _parse_window(text: str) -> Tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError as exc:
        raise InputError(f"bad window {text!r}: expected START:END") from exc


def _parse_peak(text: str) -> Tuple[float, float]:
    try:
        m, s = text.split(":")
        return float(m), float(s)
    except ValueError as exc:
        raise InputError(f"bad peak {text!r}: expected MEAN:STD") from exc


def _manifest_path(opts: Dict[str, Any], primary: Optional[str], command: str) -> str:
    if opts.get("manifest"):
        return str(opts["manifest"])
    if primary:
        return str(primary) + ".manifest.json"
    return command + ".manifest.json"


def _emit_manifest(
    command: str,
    opts: Dict[str, Any],
    primary: Optional[str],
    duration: float,
    steps: Optional[int] = None,
    updates: Optional[int] = None,
) -> None:
    public = {k: v for k, v in opts.items() if k != "manifest"}
    argv = ["trafficsim", command]
    for key in sorted(public):
        argv.append("--" + key.replace("_", "-") + "=" + json.dumps(public[key], sort_keys=True))
    manifest = tio.RunManifest(
        command=" ".join(argv),
        config_hash=tio.config_hash(public),
        seed=public.get("seed"),
        schema_versions=dict(tio.SCHEMA_VERSIONS),
        duration_s=duration,
        steps_per_s=(steps / duration) if steps and duration > 0 else None,
        vehicle_updates_per_s=(updates / duration) if updates and duration > 0 else None,
    )
    tio.save_manifest(_manifest_path(opts, primary, command), manifest)


def cmd_build_map(opts: Dict[str, Any]) -> None:
    roads, junctions = tio.load_raw_network(opts["input"])
    options = BuildOptions(
        lane_width=float(opts["lane_width"]),
        snap_radius=float(opts["snap_radius"]),
        allow_boundaries=bool(opts["allow_boundaries"]),
    )
    net = build_network(roads, junctions, options)
    issues = validate_network(net)
    if issues:
        first = issues[0]
        raise TrafficSimError(
            f"built network failed validation ({len(issues)} issues; "
            f"first: {first.entity} {first.kind}: {first.message})"
        )
    tio.save_network(opts["output"], net)
    print(
        f"build-map: {len(net.roads)} roads, {len(net.junctions)} junctions, "
        f"{len(net.lanes)} lanes -> {opts['output']}"
    )


def cmd_gen_grid(opts: Dict[str, Any]) -> None:
    net = generate_grid(
        rows=int(opts["rows"]),
        cols=int(opts["cols"]),
        block_length=float(opts["block"]),
        lanes_per_direction=int(opts["lanes"]),
        max_speed=float(opts["speed"]),
    )
    tio.save_network(opts["output"], net)
    print(
        f"gen-grid: {opts['rows']}x{opts['cols']} grid, {len(net.roads)} roads, "
        f"{len(net.lanes)} lanes -> {opts['output']}"
    )


def cmd_gen_od(opts: Dict[str, Any]) -> None:
    net = tio.load_network(opts["net"])
    zones = tio.load_zones(opts["zones"])
    road_lanes = {l.id for l in net.lanes.values() if l.kind == "road"}
    for zone in zones:
        bad = [l for l in zone.lanes if l not in road_lanes]
        if bad:
            raise InputError(f"zone {zone.id}: lanes {bad} are not road lanes of the network")
    total = float(opts["total"])
    if opts["model"] == "gravity":
        od = gravity_od(zones, total_trips=total, gamma=float(opts["gamma"]))
    else:
        masses = [z.mass for z in zones]
        scale = total / sum(masses)
        od = radiation_od(zones, [m * scale for m in masses])
    tio.save_od(opts["output"], od)
    print(f"gen-od: {opts['model']} model, {len(zones)} zones, total {od.total():.1f} -> {opts['output']}")


def cmd_gen_demand(opts: Dict[str, Any]) -> None:
    od = tio.load_od(opts["od"])
    net = tio.load_network(opts["net"])
    window = _parse_window(str(opts["window"]))
    peak = _parse_peak(str(opts["peak"])) if opts["peak"] else None
    profile = DepartureProfile(kind=str(opts["profile"]), window=window, peak=peak)
    trips = od_to_trips(od, net, profile, seed=int(opts["seed"]), mode_share=float(opts["mode_share"]))
    tio.save_trips(opts["output"], trips)
    print(f"gen-demand: {len(trips)} trips -> {opts['output']}")


def cmd_simulate(opts: Dict[str, Any]) -> Tuple[int, int]:
    net = tio.load_network(opts["net"])
    trips = tio.load_trips(opts["trips"])
    threads = opts["threads"]
    if threads is None:
        threads = os.cpu_count() or 1
    config = EngineConfig(
        dt=float(opts["dt"]),
        controller=_CONTROLLERS[str(opts["controller"])],
        threads=int(threads),
        speed_window=float(opts["speed_window"]),
    )
    world = World(net, trips, config, seed=int(opts["seed"]))
    steps = int(opts["steps"])
    recorder = tio.JsonlRecorder(opts["record"]) if opts["record"] else None
    try:
        out = world.run(steps, recorder)
    finally:
        if recorder is not None:
            recorder.close()
        world.close()
    if opts["roads"]:
        tio.save_road_speeds(opts["roads"], out.road_windows)
    durations = out.travel_durations()
    tt = metrics.TravelTimes(durations=durations, unfinished=out.driving_at_end, horizon=steps * config.dt)
    att = metrics.att(tt) if durations else float("nan")
    print(
        f"simulate: {steps} steps x dt={config.dt:g}s, {out.total_trips} trips, "
        f"{len(out.finished)} finished, {out.driving_at_end} driving, "
        f"{out.unserved} unserved, {out.dropped} dropped, att={att:.1f}s"
    )
    return steps, out.vehicle_updates


def cmd_analyze(opts: Dict[str, Any]) -> None:
    records, truncated = tio.load_records(opts["record"])
    if truncated:
        print("analyze: warning: record stream is truncated, using complete prefix", file=sys.stderr)
    road_windows = tio.load_road_speeds(opts["roads"])
    trips = tio.load_trips(opts["trips"])
    dt = float(opts["dt"])
    horizon = opts["horizon"]
    if horizon is None:
        horizon = max((r.t for r in records), default=0.0)
    horizon = float(horizon)

    departures = {t.id: t.departure for t in trips}
    tt = metrics.travel_times_from_records(records, departures, dt=dt, horizon=horizon)
    appeared = {r.id for r in records}
    unserved = len([t for t in trips if t.id not in appeared])
    driving = tt.unfinished - unserved
    att = metrics.att(tt) if tt.durations else float("nan")
    att_pen = metrics.att_penalized(tt) if (tt.durations or tt.unfinished) else float("nan")

    comparisons: Dict[str, float] = {}
    if opts["compare_speeds"]:
        real = tio.load_road_speeds(opts["compare_speeds"])
        sim_table = metrics.speed_table(road_windows)
        real_table = metrics.speed_table(real)
        if set(sim_table) != set(real_table):
            raise InputError("compare-speeds: window keys do not match the simulated road table")
        keys = sorted(sim_table)
        sim_vals = [sim_table[k] for k in keys]
        real_vals = [real_table[k] for k in keys]
        comparisons["rmse_speeds"] = metrics.rmse(sim_vals, real_vals)
        comparisons["spearman_speeds"] = metrics.spearman(sim_vals, real_vals)
    if opts["compare_od"]:
        real_od = tio.load_od(opts["compare_od"])
        sim_od = _od_from_trips(trips, real_od)
        comparisons["cpc_od"] = metrics.cpc(sim_od, real_od)
        comparisons["rmse_od"] = metrics.rmse(sim_od, real_od)

    report = tio.Report(
        att=att,
        att_penalized=att_pen,
        finished=len(tt.durations),
        driving_at_end=driving,
        unserved=unserved,
        total_trips=len(trips),
        road_speeds=road_windows,
        comparisons=comparisons,
    )
    tio.save_report(opts["report"], report)
    extra = "".join(f", {k}={v:.4f}" for k, v in sorted(comparisons.items()))
    print(
        f"analyze: {report.finished}/{report.total_trips} finished, att={att:.1f}s, "
        f"att_penalized={att_pen:.1f}s{extra} -> {opts['report']}"
    )


def _od_from_trips(trips: Sequence, real_od) -> "object":
    """Rebuild an OD matrix from trips using the observed matrix's zoning."""
    import numpy as np

    from .demand import ODMatrix

    zone_of: Dict[str, int] = {}
    for zi, zone in enumerate(real_od.zones):
        for lane in zone.lanes:
            zone_of[lane] = zi
    n = len(real_od.zones)
    counts = np.zeros((n, n), dtype=float)
    unmapped = 0
    for trip in trips:
        oi = zone_of.get(trip.origin_lane)
        di = zone_of.get(trip.dest_lane)
        if oi is None or di is None:
            unmapped += 1
            continue
        counts[oi, di] += 1.0
    if unmapped:
        print(f"analyze: warning: {unmapped} trips outside the observed zoning", file=sys.stderr)
    return ODMatrix(zones=list(real_od.zones), counts=counts)


def _parse_scenarios(text: str) -> List[Tuple[int, int, int]]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            grid, trips = part.split(":")
            rows, cols = grid.lower().split("x")
            out.append((int(rows), int(cols), int(trips)))
        except ValueError as exc:
            raise InputError(f"bad scenario {part!r}: expected RxC:TRIPS") from exc
    if not out:
        raise InputError("bench: no scenarios given")
    return out


def cmd_bench(opts: Dict[str, Any]) -> None:
    scenarios = _parse_scenarios(opts["scenarios"])
    steps = int(opts["steps"])
    dt = float(opts["dt"])
    repeats = int(opts["repeats"])
    if repeats < 1:
        raise InputError("bench: repeats must be >= 1")
    threads = opts["threads"]
    if threads is None:
        threads = os.cpu_count() or 1
    seed = int(opts["seed"])

    rows_out = []
    for index, (rows, cols, n_trips) in enumerate(scenarios):
        net = generate_grid(rows=rows, cols=cols)
        trips = random_trips(net, n_trips, seed=seed + index, window=(0.0, steps * dt))
        walls = []
        updates = 0
        for _ in range(repeats):
            config = EngineConfig(dt=dt, threads=int(threads))
            world = World(net, trips, config, seed=seed)
            t0 = time.perf_counter()
            out = world.run(steps)
            walls.append(time.perf_counter() - t0)
            updates = out.vehicle_updates
            world.close()
        mean_wall = sum(walls) / len(walls)
        rows_out.append(
            {
                "scenario": f"{rows}x{cols}:{n_trips}",
                "vehicles": n_trips,
                "steps": steps,
                "repeats": repeats,
                "threads": int(threads),
                "mean_wall_s": mean_wall,
                "mean_step_ms": 1000.0 * mean_wall / steps,
                "vehicle_updates_per_s": (updates / mean_wall) if mean_wall > 0 else 0.0,
            }
        )
    rows_out.sort(key=lambda r: (r["vehicles"], r["scenario"]))

    header = f"{'scenario':>14} {'vehicles':>9} {'steps':>6} {'mean wall s':>12} {'step ms':>9} {'updates/s':>12}"
    print(header)
    for row in rows_out:
        print(
            f"{row['scenario']:>14} {row['vehicles']:>9d} {row['steps']:>6d} "
            f"{row['mean_wall_s']:>12.3f} {row['mean_step_ms']:>9.2f} "
            f"{row['vehicle_updates_per_s']:>12.0f}"
        )
    if opts["output"]:
        doc = tio._header("bench")
        doc["rows"] = rows_out
        tio.write_document(opts["output"], doc)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = getattr(args, "command", None)
    if command is None:
        parser.print_help()
        return 2

    given = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        opts = _resolve(command, given)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    primary_key = {
        "build-map": "output",
        "gen-grid": "output",
        "gen-od": "output",
        "gen-demand": "output",
        "simulate": "record",
        "analyze": "report",
        "bench": "output",
    }[command]
    primary = opts.get(primary_key) or (opts.get("roads") if command == "simulate" else None)

    handlers = {
        "build-map": cmd_build_map,
        "gen-grid": cmd_gen_grid,
        "gen-od": cmd_gen_od,
        "gen-demand": cmd_gen_demand,
        "simulate": cmd_simulate,
        "analyze": cmd_analyze,
        "bench": cmd_bench,
    }
    t0 = time.perf_counter()
    try:
        result = handlers[command](opts)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrafficSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    duration = time.perf_counter() - t0

    steps = updates = None
    if command == "simulate" and isinstance(result, tuple):
        steps, updates = result
    try:
        _emit_manifest(command, opts, primary, duration, steps=steps, updates=updates)
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
