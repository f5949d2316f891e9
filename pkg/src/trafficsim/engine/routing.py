"""Free-flow-time shortest routes over the lane graph.

Every open lane (road lanes and connectors alike) is a node weighted by
length / max_speed. Distances-to-destination are computed by a reverse
Dijkstra, so the cost of a route is the right-associated fold
w(l0) + (w(l1) + (... + w(dest))) and is bit-reproducible. Route extraction
walks tight edges greedily, breaking ties by smallest next-lane id.
"""

from __future__ import annotations

import heapq
from collections import OrderedDict

from ..errors import InputError, NoRouteError
from ..network import OPEN, ROAD, RoadNetwork


class Router:
    def __init__(self, net: RoadNetwork, cache_size: int = 256):
        self.net = net
        self.cache_size = cache_size
        self._dist_cache: OrderedDict[int, dict[int, float]] = OrderedDict()
        self._weights: dict[int, float] = {}
        self._successors: dict[int, list[int]] = {}
        self._predecessors: dict[int, list[int]] = {}
        self.rebuild()

    def rebuild(self) -> None:
        """Refresh weights and adjacency after speed or restriction changes."""
        self._dist_cache.clear()
        self._weights = {}
        self._successors = {}
        self._predecessors = {}
        for lid, lane in self.net.lanes.items():
            if lane.restriction != OPEN:
                continue
            self._weights[lid] = lane.length / lane.max_speed
        for lid in self._weights:
            lane = self.net.lanes[lid]
            self._successors[lid] = [s for s in lane.successors if s in self._weights]
            self._predecessors[lid] = [p for p in lane.predecessors if p in self._weights]

    def weight(self, lane_id: int) -> float:
        return self._weights[lane_id]

    def dist_to(self, dest_lane: int) -> dict[int, float]:
        """Cost from every lane to dest_lane, inclusive of both endpoints."""
        cached = self._dist_cache.get(dest_lane)
        if cached is not None:
            self._dist_cache.move_to_end(dest_lane)
            return cached
        if dest_lane not in self._weights:
            raise InputError(f"destination lane {dest_lane} is closed or unknown")
        dist: dict[int, float] = {}
        heap = [(self._weights[dest_lane], dest_lane)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in dist:
                continue
            dist[u] = d
            for p in self._predecessors[u]:
                if p not in dist:
                    heapq.heappush(heap, (self._weights[p] + d, p))
        self._dist_cache[dest_lane] = dist
        while len(self._dist_cache) > self.cache_size:
            self._dist_cache.popitem(last=False)
        return dist

    def route(self, origin_lane: int, dest_lane: int) -> list[int]:
        """Minimal-cost lane sequence from origin to destination.

        Both must be road lanes. At every node the walk follows a tight edge
        (w(u) + dist(v) == dist(u), an exact float identity by construction),
        choosing the smallest successor id among ties.
        """
        for lid in (origin_lane, dest_lane):
            if lid not in self.net.lanes:
                raise InputError(f"unknown lane {lid}")
            if self.net.lanes[lid].kind != ROAD:
                raise InputError(f"lane {lid} is not a road lane")
        dist = self.dist_to(dest_lane)
        if origin_lane not in dist:
            raise NoRouteError(f"no route from lane {origin_lane} to lane {dest_lane}")
        path = [origin_lane]
        u = origin_lane
        while u != dest_lane:
            du = dist[u]
            nxt = None
            for v in self._successors[u]:  # successor lists are sorted
                if v in dist and self._weights[u] + dist[v] == du:
                    nxt = v
                    break
            if nxt is None:
                raise NoRouteError(
                    f"route extraction stalled at lane {u} toward {dest_lane}"
                )
            path.append(nxt)
            u = nxt
        return path

    def route_cost(self, path: list[int]) -> float:
        """Right-associated cost fold; bitwise-equal to dist_to values."""
        cost = 0.0
        for lid in reversed(path):
            cost = self._weights[lid] + cost
        return cost


def roads_of_route(net: RoadNetwork, path: list[int]) -> list[str]:
    """Ordered road ids visited by a lane route (connectors skipped)."""
    roads: list[str] = []
    for lid in path:
        lane = net.lanes[lid]
        if lane.kind == ROAD and (not roads or roads[-1] != lane.parent):
            roads.append(lane.parent)
    return roads
