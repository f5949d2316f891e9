"""Shared fixtures: small hand-built networks used across test modules."""

from __future__ import annotations

import pytest

from trafficsim.network import (
    BuildOptions,
    RawJunction,
    RawRoad,
    RoadNetwork,
    build_network,
    generate_grid,
)


def make_corridor(lengths=(500.0, 500.0), speed=16.67, lane_count=1) -> RoadNetwork:
    """Straight west-to-east chain of roads joined by pass-through junctions.

    Junctions have a single approach each, so nothing is signalized.
    """
    xs = [0.0]
    for length in lengths:
        xs.append(xs[-1] + length)
    roads = [
        RawRoad(
            id=f"r{i}",
            polyline=[(xs[i], 0.0), (xs[i + 1], 0.0)],
            lane_count=lane_count,
            max_speed=speed,
        )
        for i in range(len(lengths))
    ]
    junctions = [
        RawJunction(
            id=f"j{i}",
            position=(xs[i + 1], 0.0),
            in_roads=[f"r{i}"],
            out_roads=[f"r{i + 1}"],
        )
        for i in range(len(lengths) - 1)
    ]
    return build_network(roads, junctions, BuildOptions(coordinate_frame="local"))


def make_cross(arm=150.0, speed=13.9, lane_count=1, allow_uturns=False) -> RoadNetwork:
    """Four-approach cross junction with two-way arms; signalized by default."""
    tips = {"n": (0.0, arm), "s": (0.0, -arm), "e": (arm, 0.0), "w": (-arm, 0.0)}
    roads = []
    for name, tip in tips.items():
        roads.append(
            RawRoad(id=f"{name}_in", polyline=[tip, (0.0, 0.0)], lane_count=lane_count, max_speed=speed)
        )
        roads.append(
            RawRoad(id=f"{name}_out", polyline=[(0.0, 0.0), tip], lane_count=lane_count, max_speed=speed)
        )
    junction = RawJunction(
        id="center",
        position=(0.0, 0.0),
        in_roads=[f"{n}_in" for n in tips],
        out_roads=[f"{n}_out" for n in tips],
    )
    options = BuildOptions(coordinate_frame="local", allow_uturns=allow_uturns)
    return build_network(roads, [junction], options)


@pytest.fixture
def corridor() -> RoadNetwork:
    return make_corridor()


@pytest.fixture
def cross() -> RoadNetwork:
    return make_cross()


@pytest.fixture(scope="session")
def grid33() -> RoadNetwork:
    return generate_grid(3, 3)


@pytest.fixture(scope="session")
def grid44() -> RoadNetwork:
    return generate_grid(4, 4)
