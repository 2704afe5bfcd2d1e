"""Small 2D polygon utilities (shoelace area, half-plane clipping, queries).

Polygons are (n, 2) float arrays of vertices in counter-clockwise order,
implicitly closed (last vertex connects back to the first).
"""
from __future__ import annotations

import numpy as np


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise polygons."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_halfplane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Clip a convex polygon against the half-plane normal . p <= offset.

    Sutherland-Hodgman for a single plane. Returns an (m, 2) array,
    possibly empty when the polygon lies entirely outside.
    """
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return poly
    n = np.asarray(normal, dtype=float)
    d = poly @ n - offset
    out: list[np.ndarray] = []
    m = len(poly)
    for i in range(m):
        j = (i + 1) % m
        pi, pj = poly[i], poly[j]
        di, dj = d[i], d[j]
        if di <= 0.0:
            out.append(pi)
            if dj > 0.0:
                t = di / (di - dj)
                out.append(pi + t * (pj - pi))
        elif dj <= 0.0:
            t = di / (di - dj)
            out.append(pi + t * (pj - pi))
    if not out:
        return np.zeros((0, 2))
    result = np.array(out)
    # drop exact duplicates created at shared intersection points
    keep = np.ones(len(result), dtype=bool)
    for i in range(len(result)):
        j = (i + 1) % len(result)
        if np.all(np.abs(result[i] - result[j]) < 1e-12):
            keep[j] = False
    return result[keep]


def clip_convex(poly: np.ndarray, halfplanes) -> np.ndarray:
    """Clip a convex polygon by a sequence of (normal, offset) half-planes."""
    out = np.asarray(poly, dtype=float)
    for normal, offset in halfplanes:
        out = clip_halfplane(out, normal, offset)
        if len(out) < 3:
            return np.zeros((0, 2))
    return out


def point_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Vectorized even-odd crossing test; boundary points are unspecified."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    v = np.asarray(poly, dtype=float)
    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for k in range(len(v)):
        cond = (y1[k] > py) != (y2[k] > py)
        if not cond.any():
            continue
        xi = x1[k] + (py - y1[k]) * (x2[k] - x1[k]) / (y2[k] - y1[k])
        inside ^= cond & (px < xi)
    return inside


def point_in_region(points: np.ndarray, outer: np.ndarray, holes=()) -> np.ndarray:
    """True for points inside ``outer`` and outside every hole polygon."""
    inside = point_in_polygon(points, outer)
    for hole in holes:
        inside &= ~point_in_polygon(points, hole)
    return inside


def segment_point_distance(a, b, points: np.ndarray) -> np.ndarray:
    """Distance from each point to the segment a-b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def segment_segment_distance(a0, a1, b0, b1) -> float:
    """Minimum distance between segments a0-a1 and b0-b1."""
    d = min(
        segment_point_distance(a0, a1, [b0])[0],
        segment_point_distance(a0, a1, [b1])[0],
        segment_point_distance(b0, b1, [a0])[0],
        segment_point_distance(b0, b1, [a1])[0],
    )
    if d > 0.0 and _segments_intersect(a0, a1, b0, b1):
        return 0.0
    return d


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_intersect(a0, a1, b0, b1) -> bool:
    d1 = _orient(b0, b1, a0)
    d2 = _orient(b0, b1, a1)
    d3 = _orient(a0, a1, b0)
    d4 = _orient(a0, a1, b1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))
