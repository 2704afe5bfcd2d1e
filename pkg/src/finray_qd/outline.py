"""Fin-ray finger cross-section construction.

Local frame: the contact edge is the segment x = 0, y in [0, H] (tip at the
top), the base sits on y = 0 with width L, and the inclined back edge joins
(L, 0) to the tip (0, H). The solid consists of a front wall of thickness
t_flex along the contact edge, a back wall of thickness t_back along the
inclined edge, a solid tip block of length L_tip, and N crossbeam ribs of
thickness t_rib spanning between the inner wall faces, tilted by D_angle
from the contact-edge perpendicular (positive angles raise the rib's back
end toward the tip).

The empty space between walls, base and tip block forms the cavity; the
ribs partition it into N+1 pockets. Pockets that touch the base stay open
(notches in the outer boundary); the rest are interior holes, so the result
is a manifold, multiply-connected region. Ribs are clipped to the cavity,
which matters for strongly tilted ribs whose ends otherwise run past the
base or the tip block.

Geometric heights where the walls merge are tracked explicitly: ribs are
stationed evenly over the cavity height, i.e. up to the tip block or up to
the wall-merge height, whichever is lower.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import FingerDesign
from .errors import GeometryError
from .geom import clip_convex, polygon_area

MIN_WALL = 0.5          # mm; zero-thickness walls are replaced by this
_EPS = 1e-9

TAG_MOUNT = "mount"
TAG_CONTACT = "contact_surface"
TAG_BACK = "back_surface"
TAG_TIP = "tip"
TAG_RIB = "rib_interior"
ALL_TAGS = (TAG_MOUNT, TAG_CONTACT, TAG_BACK, TAG_TIP, TAG_RIB)


@dataclass(frozen=True)
class PolygonRegion:
    """A polygon with holes plus one boundary tag per edge, ready to mesh."""

    outer: np.ndarray
    outer_tags: tuple[str, ...]
    holes: tuple[np.ndarray, ...] = ()
    hole_tags: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if len(self.outer_tags) != len(self.outer):
            raise ValueError("need one tag per outer edge")
        for h, t in zip(self.holes, self.hole_tags):
            if len(t) != len(h):
                raise ValueError("need one tag per hole edge")


def region_from_polygon(outer, tag: str = TAG_BACK) -> PolygonRegion:
    """Wrap a plain polygon (no holes) with a uniform boundary tag."""
    outer = np.asarray(outer, dtype=float)
    return PolygonRegion(outer=outer, outer_tags=(tag,) * len(outer))


@dataclass(frozen=True)
class FingerOutline:
    """Exact cross-section geometry of one finger; all areas in mm^2."""

    finger: FingerDesign
    t_flex_eff: float
    t_back_eff: float
    y_tip: float               # bottom of the solid tip block
    y_merge: float             # height where the wall inner faces cross
    y_cavity_top: float        # min(y_tip, y_merge)
    outer: np.ndarray
    outer_tags: tuple[str, ...]
    holes: tuple[np.ndarray, ...]
    hole_tags: tuple[tuple[str, ...], ...]
    pockets: tuple[np.ndarray, ...]      # all N+1 pockets, bottom to top
    rib_quads: tuple[np.ndarray, ...]
    rib_spans: tuple[float, ...]         # centerline span wall-to-wall
    rib_stations: tuple[float, ...]
    triangle_area: float
    cavity_area: float
    rib_areas: tuple[float, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def solid_area(self) -> float:
        return self.triangle_area - self.cavity_area + sum(self.rib_areas)

    @property
    def walls_tip_area(self) -> float:
        """Cross-section area of walls plus tip block, ribs excluded."""
        return self.triangle_area - self.cavity_area

    def region(self) -> PolygonRegion:
        return PolygonRegion(outer=self.outer, outer_tags=self.outer_tags,
                             holes=self.holes, hole_tags=self.hole_tags)


def _band_halfplanes(anchor, normal, half_width):
    """The two half-planes bounding a band of given half width."""
    c = float(np.dot(normal, anchor))
    return [(normal, c + half_width), (-normal, -(c - half_width))]


def finger_outline(finger: FingerDesign) -> FingerOutline:
    """Build the exact outline (outer boundary, holes, ribs) of a finger.

    Raises :class:`GeometryError` for infeasible inputs: overlapping walls,
    a tip block swallowing the finger, ribs that overlap each other or the
    base/tip block at the front wall.
    """
    H, L, L_tip = finger.H, finger.L, finger.L_tip
    N, t_rib = int(finger.N), finger.t_rib
    if min(H, L, L_tip, t_rib, finger.W) <= 0:
        raise GeometryError("all lengths must be positive")
    if N < 1:
        raise GeometryError("at least one rib is required")
    if L_tip >= H:
        raise GeometryError("solid tip is as long as the finger (L_tip >= H)")
    t_flex = max(finger.t_flex, MIN_WALL)
    t_back = max(finger.t_back, MIN_WALL)
    if t_flex + t_back >= L:
        raise GeometryError("front and back walls overlap (t_flex + t_back >= L)")

    theta = math.radians(finger.D_angle)
    if abs(finger.D_angle) >= 90.0:
        raise GeometryError("rib tilt must satisfy |D_angle| < 90 degrees")

    s_back = math.hypot(H, L)
    c_inner = L * H - t_back * s_back        # back inner face: H x + L y = c_inner
    y_tip = H - L_tip
    y_merge = (c_inner - H * t_flex) / L
    y_cap = min(y_tip, y_merge)
    if y_cap <= _EPS:
        raise GeometryError("walls and tip block leave no cavity")

    def x_back_inner(y):
        return (c_inner - L * y) / H

    # cavity polygon, counter-clockwise from the bottom-left corner
    if y_merge <= y_tip + _EPS:
        cavity = np.array([
            [t_flex, 0.0], [x_back_inner(0.0), 0.0], [t_flex, y_merge]])
    else:
        cavity = np.array([
            [t_flex, 0.0], [x_back_inner(0.0), 0.0],
            [x_back_inner(y_cap), y_cap], [t_flex, y_cap]])
    cavity_area = polygon_area(cavity)
    if cavity_area <= _EPS:
        raise GeometryError("cavity has no area")

    u = np.array([math.cos(theta), math.sin(theta)])       # rib axis
    nrm = np.array([-math.sin(theta), math.cos(theta)])    # rib normal
    denom = H * u[0] + L * u[1]
    if denom <= _EPS:
        raise GeometryError("rib axis runs parallel to the back wall")

    stations = [k * y_cap / (N + 1) for k in range(1, N + 1)]
    half_band = 0.5 * t_rib / math.cos(theta)   # vertical half extent at the front wall
    gap_perp = (y_cap / (N + 1)) * math.cos(theta)
    if gap_perp <= t_rib * (1 + 1e-12):
        raise GeometryError("ribs overlap: rib thickness exceeds rib spacing")
    if stations[0] - half_band <= _EPS:
        raise GeometryError("lowest rib touches the base", rib_index=0)
    if stations[-1] + half_band >= y_cap - _EPS:
        raise GeometryError("highest rib touches the cavity top", rib_index=N - 1)

    rib_quads, rib_spans, rib_areas, band_planes = [], [], [], []
    for k, y_k in enumerate(stations):
        anchor = np.array([t_flex, y_k])
        span = (c_inner - H * t_flex - L * y_k) / denom
        if span <= _EPS:
            raise GeometryError(f"rib {k} has non-positive span", rib_index=k)
        planes = _band_halfplanes(anchor, nrm, 0.5 * t_rib)
        quad = clip_convex(cavity, planes)
        area = polygon_area(quad) if len(quad) >= 3 else 0.0
        if area <= _EPS:
            raise GeometryError(f"rib {k} lies outside the cavity", rib_index=k)
        rib_quads.append(quad)
        rib_spans.append(span)
        rib_areas.append(area)
        band_planes.append(planes)

    # pockets: slices of the cavity between consecutive rib bands
    pockets = []
    for k in range(N + 1):
        planes = []
        if k > 0:
            upper_of_below = band_planes[k - 1][0]      # nrm . p <= c + w
            planes.append((-upper_of_below[0], -upper_of_below[1]))
        if k < N:
            lower_of_above = band_planes[k][1]          # -nrm . p <= -(c - w)
            planes.append((-lower_of_above[0], -lower_of_above[1]))
        pocket = clip_convex(cavity, planes)
        if len(pocket) < 3 or polygon_area(pocket) <= _EPS:
            raise GeometryError(f"pocket {k} vanished between ribs")
        pockets.append(pocket)

    outer, outer_tags = _outer_with_notches(H, L, pockets)
    holes, hole_tags = [], []
    for pocket in pockets:
        if np.min(pocket[:, 1]) < _EPS:
            continue                        # open at the base, spliced into outer
        tags = []
        m = len(pocket)
        on_cap = abs(y_cap - y_tip) <= _EPS
        for i in range(m):
            a, b = pocket[i], pocket[(i + 1) % m]
            if on_cap and abs(a[1] - y_cap) < 1e-7 and abs(b[1] - y_cap) < 1e-7:
                tags.append(TAG_TIP)        # underside of the solid tip block
            else:
                tags.append(TAG_RIB)
        holes.append(pocket)
        hole_tags.append(tuple(tags))

    return FingerOutline(
        finger=finger, t_flex_eff=t_flex, t_back_eff=t_back,
        y_tip=y_tip, y_merge=y_merge, y_cavity_top=y_cap,
        outer=outer, outer_tags=tuple(outer_tags),
        holes=tuple(holes), hole_tags=tuple(hole_tags),
        pockets=tuple(pockets), rib_quads=tuple(rib_quads),
        rib_spans=tuple(rib_spans), rib_stations=tuple(stations),
        triangle_area=0.5 * L * H, cavity_area=cavity_area,
        rib_areas=tuple(rib_areas))


def _outer_with_notches(H, L, pockets):
    """Triangle perimeter with base-touching pockets spliced in as notches."""
    notches = []
    for pocket in pockets:
        if np.min(pocket[:, 1]) >= _EPS:
            continue
        bottom = np.where(pocket[:, 1] < _EPS)[0]
        if len(bottom) < 2:
            raise GeometryError("notch touches the base in a single point")
        i = bottom[np.argmin(pocket[bottom, 0])]     # left end of the base edge
        j = bottom[np.argmax(pocket[bottom, 0])]     # right end
        path = _walk_over_top(pocket, i, j, set(bottom.tolist()))
        notches.append(path)
    notches.sort(key=lambda p: p[0, 0])

    verts = [np.array([0.0, 0.0])]
    tags = []
    for path in notches:
        tags.append(TAG_MOUNT)               # base segment up to the notch
        verts.extend(path)
        tags.extend([TAG_RIB] * (len(path) - 1))
    tags.append(TAG_MOUNT)                   # base segment to the back corner
    verts.append(np.array([L, 0.0]))
    tags.append(TAG_BACK)
    verts.append(np.array([0.0, H]))
    tags.append(TAG_CONTACT)
    return np.array(verts), tags


def _walk_over_top(pocket, i, j, bottom):
    """Vertex path from base vertex i to base vertex j avoiding the base."""
    m = len(pocket)
    for step in (-1, 1):
        order = [i]
        t = (i + step) % m
        ok = True
        while t != j:
            if t in bottom:
                ok = False
                break
            order.append(t)
            t = (t + step) % m
            if len(order) > m:
                ok = False
                break
        if ok:
            order.append(j)
            return pocket[order]
    raise GeometryError("notch boundary walk failed")
