"""Regenerate the committed pipeline fixtures and golden outputs.

Run from the repository root:

    python3 tests/data/regen_golden.py

Writes tests/data/raw.json and tests/data/zones.json (pipeline inputs) and
the six expected outputs under tests/data/golden/. The pipeline acceptance
test replays the same commands into a temporary directory and compares every
output byte for byte, so regenerate only when an intentional format or
behavior change invalidates the old goldens.
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

DATA = Path(__file__).resolve().parent
GOLDEN = DATA / "golden"

sys.path.insert(0, str(DATA.parent.parent / "src"))

from trafficsim import demand, io as tio  # noqa: E402
from trafficsim.cli import main  # noqa: E402
from trafficsim.network import RawJunction, RawRoad  # noqa: E402

SPEED = 13.9


def fixture_raw() -> tuple[list[RawRoad], list[RawJunction]]:
    """Irregular 3x3 town grid: uneven blocks, two-way streets.

    Strongly connected without u-turns; the center crossing has four
    approaches, edge crossings three, corners two, so the fixture exercises
    signalized and unsignalized junctions in one map.
    """
    xs = [-260.0, 0.0, 240.0]
    ys = [-220.0, 0.0, 250.0]

    def node(r, c):
        return f"j{r}{c}", (xs[c], ys[r])

    roads: list[RawRoad] = []
    incoming: dict[str, list[str]] = {}
    outgoing: dict[str, list[str]] = {}

    def road(rid, a_node, b_node):
        (a_id, a_pos), (b_id, b_pos) = a_node, b_node
        roads.append(RawRoad(id=rid, polyline=[a_pos, b_pos], lane_count=1, max_speed=SPEED))
        outgoing.setdefault(a_id, []).append(rid)
        incoming.setdefault(b_id, []).append(rid)

    for r in range(3):
        for c in range(2):
            road(f"h{r}{c}e", node(r, c), node(r, c + 1))
            road(f"h{r}{c}w", node(r, c + 1), node(r, c))
    for r in range(2):
        for c in range(3):
            road(f"v{r}{c}n", node(r, c), node(r + 1, c))
            road(f"v{r}{c}s", node(r + 1, c), node(r, c))

    junctions = [
        RawJunction(
            id=node(r, c)[0],
            in_roads=sorted(incoming[node(r, c)[0]]),
            out_roads=sorted(outgoing[node(r, c)[0]]),
            position=node(r, c)[1],
        )
        for r in range(3)
        for c in range(3)
    ]
    return roads, junctions


def run(argv: list[str]) -> None:
    code = main(argv)
    if code != 0:
        raise SystemExit(f"command failed ({code}): {argv}")


def regenerate() -> None:
    roads, junctions = fixture_raw()
    tio.save_raw_network(DATA / "raw.json", roads, junctions)

    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        net_p = work / "net.json"
        od_p = work / "od.json"
        trips_p = work / "trips.json"
        rec_p = work / "vehicles.jsonl"
        roads_p = work / "roads.json"
        report_p = work / "report.json"

        run(["build-map", "--input", str(DATA / "raw.json"), "--output", str(net_p)])

        net = tio.load_network(net_p)
        tio.save_zones(DATA / "zones.json", demand.make_zones(net, 2, 2))

        run([
            "gen-od", "--net", str(net_p), "--zones", str(DATA / "zones.json"),
            "--model", "gravity", "--total", "60", "--gamma", "2.0",
            "--output", str(od_p),
        ])
        run([
            "gen-demand", "--od", str(od_p), "--net", str(net_p),
            "--profile", "uniform", "--window", "0:240", "--seed", "42",
            "--output", str(trips_p),
        ])
        run([
            "simulate", "--net", str(net_p), "--trips", str(trips_p),
            "--steps", "600", "--dt", "1.0", "--controller", "fixed",
            "--seed", "42", "--threads", "1",
            "--record", str(rec_p), "--roads", str(roads_p),
        ])
        run([
            "analyze", "--record", str(rec_p), "--roads", str(roads_p),
            "--trips", str(trips_p), "--compare-od", str(od_p),
            "--horizon", "600", "--dt", "1.0", "--report", str(report_p),
        ])

        GOLDEN.mkdir(exist_ok=True)
        for src in (net_p, od_p, trips_p, rec_p, roads_p, report_p):
            shutil.copyfile(src, GOLDEN / src.name)
            print(f"wrote {GOLDEN / src.name} ({src.stat().st_size} bytes)")


if __name__ == "__main__":
    regenerate()
