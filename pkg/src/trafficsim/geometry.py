"""Planar polyline helpers used by the network builder and the engine.

All geometry downstream of the builder lives in a local planar frame in
meters. Headings are degrees clockwise from north (+y), the convention the
recorder stream uses for vehicle angles.
"""

from __future__ import annotations

import math
from bisect import bisect_right

Point = tuple[float, float]

EARTH_RADIUS_M = 6371008.8


def polyline_length(points: list[Point]) -> float:
    return sum(math.dist(points[i], points[i + 1]) for i in range(len(points) - 1))


def cumulative_lengths(points: list[Point]) -> list[float]:
    """Arc length from the first vertex to each vertex."""
    cum = [0.0]
    for i in range(len(points) - 1):
        cum.append(cum[-1] + math.dist(points[i], points[i + 1]))
    return cum


def _segment_at(cum: list[float], s: float) -> int:
    # index of the segment containing arc position s, clamped to valid range
    i = bisect_right(cum, s) - 1
    return min(max(i, 0), len(cum) - 2)


def point_at(points: list[Point], cum: list[float], s: float) -> Point:
    """Point at arc position ``s``, clamped to the polyline."""
    i = _segment_at(cum, s)
    seg = cum[i + 1] - cum[i]
    t = 0.0 if seg <= 0.0 else min(max((s - cum[i]) / seg, 0.0), 1.0)
    (x0, y0), (x1, y1) = points[i], points[i + 1]
    return (x0 + (x1 - x0) * t, y0 + (y1 - y0) * t)


def heading_deg_at(points: list[Point], cum: list[float], s: float) -> float:
    """Tangent heading at arc position ``s``, degrees clockwise from north."""
    i = _segment_at(cum, s)
    (x0, y0), (x1, y1) = points[i], points[i + 1]
    dx, dy = x1 - x0, y1 - y0
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return math.degrees(math.atan2(dx, dy)) % 360.0


def offset_polyline(points: list[Point], distance: float) -> list[Point]:
    """Parallel offset with miter joins; positive distance is to the right
    of the direction of travel.

    Miter length is capped at 4x the offset to keep near-reversals sane.
    """
    if distance == 0.0:
        return [tuple(p) for p in points]
    normals = []
    for i in range(len(points) - 1):
        (x0, y0), (x1, y1) = points[i], points[i + 1]
        dx, dy = x1 - x0, y1 - y0
        norm = math.hypot(dx, dy)
        normals.append((dy / norm, -dx / norm))
    out: list[Point] = []
    for i, (px, py) in enumerate(points):
        if i == 0:
            nx, ny = normals[0]
        elif i == len(points) - 1:
            nx, ny = normals[-1]
        else:
            ax, ay = normals[i - 1]
            bx, by = normals[i]
            mx, my = ax + bx, ay + by
            mlen = math.hypot(mx, my)
            if mlen < 1e-9:
                # 180-degree reversal: fall back to the incoming normal
                nx, ny = ax, ay
            else:
                mx, my = mx / mlen, my / mlen
                scale = mx * bx + my * by
                scale = max(scale, 0.25)  # miter limit
                nx, ny = mx / scale, my / scale
        out.append((px + distance * nx, py + distance * ny))
    return out


def looks_geographic(points: list[Point]) -> bool:
    """True when every coordinate fits in the lon/lat value range."""
    return all(-180.0 <= x <= 180.0 and -90.0 <= y <= 90.0 for x, y in points)


def project_azimuthal_equidistant(
    points: list[Point], center: Point
) -> list[Point]:
    """Project lon/lat degrees onto a local planar frame in meters.

    Azimuthal equidistant projection about ``center``; distances from the
    center are preserved, which is accurate at urban extents.
    """
    lon0, lat0 = math.radians(center[0]), math.radians(center[1])
    sin0, cos0 = math.sin(lat0), math.cos(lat0)
    out: list[Point] = []
    for lon_deg, lat_deg in points:
        lon, lat = math.radians(lon_deg), math.radians(lat_deg)
        sin_l, cos_l = math.sin(lat), math.cos(lat)
        dlon = lon - lon0
        cos_c = sin0 * sin_l + cos0 * cos_l * math.cos(dlon)
        cos_c = min(max(cos_c, -1.0), 1.0)
        c = math.acos(cos_c)
        if c < 1e-12:
            out.append((0.0, 0.0))
            continue
        k = EARTH_RADIUS_M * c / math.sin(c)
        x = k * cos_l * math.sin(dlon)
        y = k * (cos0 * sin_l - sin0 * cos_l * math.cos(dlon))
        out.append((x, y))
    return out


def bbox_center(point_lists: list[list[Point]]) -> Point:
    xs = [x for pts in point_lists for x, _ in pts]
    ys = [y for pts in point_lists for _, y in pts]
    return ((min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0)
