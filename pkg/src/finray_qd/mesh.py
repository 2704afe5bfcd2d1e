"""Triangulation of finger cross-sections (and generic tagged regions).

The mesher samples the region boundary at a clearance-aware spacing, fills
the interior with a hexagonal point lattice, Delaunay-triangulates the
combined point set and keeps the triangles whose centroid lies inside the
region. Interior lattice points falling inside the diametral disk of any
boundary sub-segment are pruned first, which guarantees those sub-segments
appear as Delaunay edges; the result is verified and re-meshed at a finer
lattice on the rare failure.

Boundary sub-edges inherit the tag of the outline edge they subdivide, so
tag provenance is exact: a contact_surface-tagged mesh edge lies on the
original contact edge.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import MeshError
from .geom import point_in_region, segment_segment_distance
from .outline import TAG_MOUNT, FingerOutline, PolygonRegion

_SHARP_ANGLE = math.radians(45.0)


@dataclass(frozen=True)
class TriMesh2D:
    """Conforming triangle mesh with tagged boundary edges.

    All triangles are counter-clockwise (positive signed area); every
    interior edge is shared by exactly two triangles; every boundary edge
    carries exactly one tag.
    """

    vertices: np.ndarray                 # (n, 2) float64, mm
    triangles: np.ndarray                # (m, 3) int32
    boundary_edges: np.ndarray           # (b, 2) int32
    boundary_tags: tuple[str, ...]       # one tag per boundary edge
    mount_nodes: np.ndarray              # (k,) int32
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_edges, self.mount_nodes):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def boundary_nodes(self, tag: str | None = None) -> np.ndarray:
        """Sorted unique node indices on (optionally tag-filtered) boundary."""
        if tag is None:
            edges = self.boundary_edges
        else:
            mask = np.array([t == tag for t in self.boundary_tags])
            edges = self.boundary_edges[mask]
        return np.unique(edges)

    def quality_report(self) -> dict:
        """Element count plus edge-length, angle and radius-edge statistics."""
        v = self.vertices[self.triangles]
        e0 = v[:, 1] - v[:, 0]
        e1 = v[:, 2] - v[:, 1]
        e2 = v[:, 0] - v[:, 2]
        l0 = np.linalg.norm(e0, axis=1)
        l1 = np.linalg.norm(e1, axis=1)
        l2 = np.linalg.norm(e2, axis=1)
        areas = self.triangle_areas()
        circumradius = l0 * l1 * l2 / (4.0 * areas)
        min_edge_tri = np.minimum(np.minimum(l0, l1), l2)
        angles = []
        for a, b, c in ((l0, l1, l2), (l1, l2, l0), (l2, l0, l1)):
            cosang = np.clip((b ** 2 + c ** 2 - a ** 2) / (2 * b * c), -1.0, 1.0)
            angles.append(np.degrees(np.arccos(cosang)))
        lengths = self.edge_lengths()
        return {
            "n_vertices": self.n_vertices,
            "n_triangles": self.n_triangles,
            "min_edge": float(lengths.min()),
            "max_edge": float(lengths.max()),
            "min_angle_deg": float(np.min(angles)),
            "min_radius_edge_ratio": float(np.min(circumradius / min_edge_tri)),
            "total_area": float(areas.sum()),
        }

    def to_obj(self, path=None) -> str:
        """Wavefront OBJ text (vertices with z = 0); optionally written to path."""
        lines = [f"v {float(x)!r} {float(y)!r} 0" for x, y in self.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.triangles]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def dump_csv(self, nodes_path, elements_path) -> None:
        """Plain CSV dump: node coordinates and element connectivity."""
        with open(nodes_path, "w") as fh:
            fh.write("node,x,y\n")
            for i, (x, y) in enumerate(self.vertices):
                fh.write(f"{i},{float(x)!r},{float(y)!r}\n")
        with open(elements_path, "w") as fh:
            fh.write("element,n0,n1,n2\n")
            for i, (a, b, c) in enumerate(self.triangles):
                fh.write(f"{i},{a},{b},{c}\n")


def _loops_of(region: PolygonRegion):
    yield region.outer, region.outer_tags
    for hole, tags in zip(region.holes, region.hole_tags):
        yield hole, tags


def _collect_segments(region: PolygonRegion):
    """All outline edges as (p0, p1, tag, loop_id, corner angles at ends)."""
    segments = []
    for loop_id, (poly, tags) in enumerate(_loops_of(region)):
        m = len(poly)
        for i in range(m):
            segments.append((poly[i], poly[(i + 1) % m], tags[i], loop_id, i))
    return segments


def _vertex_angles(poly: np.ndarray) -> np.ndarray:
    """Absolute corner angle at each vertex of a closed polygon."""
    m = len(poly)
    prev = poly[np.arange(m) - 1]
    nxt = poly[(np.arange(m) + 1) % m]
    u = prev - poly
    v = nxt - poly
    dot = np.einsum("ij,ij->i", u, v)
    nu = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
    return np.arccos(np.clip(dot / np.maximum(nu, 1e-300), -1.0, 1.0))


def _sample_boundary(region: PolygonRegion, h_min: float, h_max: float):
    """Resample outline edges; returns points, sub-edges and per-edge tags."""
    h_base = 0.5 * (h_min + h_max)
    segments = _collect_segments(region)

    # clearance of each outline edge to non-adjacent outline edges
    n_seg = len(segments)
    clearance = np.full(n_seg, np.inf)
    for a in range(n_seg):
        p0, p1 = segments[a][0], segments[a][1]
        for b in range(a + 1, n_seg):
            q0, q1 = segments[b][0], segments[b][1]
            if _share_endpoint(p0, p1, q0, q1):
                continue
            d = segment_segment_distance(p0, p1, q0, q1)
            clearance[a] = min(clearance[a], d)
            clearance[b] = min(clearance[b], d)

    # sharp-corner standoffs per loop vertex
    standoff = {}
    for loop_id, (poly, _tags) in enumerate(_loops_of(region)):
        ang = _vertex_angles(poly)
        for i, a in enumerate(ang):
            if a < _SHARP_ANGLE:
                r = (0.5 * h_min) / (2.0 * math.sin(max(a, 1e-3) / 2.0)) * 1.05
                standoff[(loop_id, i)] = max(r, 0.5 * h_base)

    points: list[np.ndarray] = []
    index_of: dict[tuple, int] = {}

    def add_point(p) -> int:
        key = (round(float(p[0]), 9), round(float(p[1]), 9))
        if key not in index_of:
            index_of[key] = len(points)
            points.append(np.asarray(p, dtype=float))
        return index_of[key]

    loop_sizes = [len(poly) for poly, _t in _loops_of(region)]
    sub_edges: list[tuple[int, int]] = []
    sub_tags: list[str] = []
    for k, (p0, p1, tag, loop_id, vid) in enumerate(segments):
        length = float(np.linalg.norm(p1 - p0))
        if length <= 1e-12:
            continue
        target = max(min(h_base, 1.5 * clearance[k]), 0.5 * h_min)
        poly_len = loop_sizes[loop_id]
        r0 = standoff.get((loop_id, vid), 0.0)
        r1 = standoff.get((loop_id, (vid + 1) % poly_len), 0.0)
        ts = _edge_stations(length, target, r0, r1)
        idx = [add_point(p0 + t * (p1 - p0)) for t in ts]
        for a, b in zip(idx[:-1], idx[1:]):
            if a != b:
                sub_edges.append((a, b))
                sub_tags.append(tag)
    points = [np.asarray(p) for p in points]
    _gabriel_split(points, sub_edges, sub_tags, h_min)
    return np.array(points), sub_edges, sub_tags


_GRADE = 1.7   # geometric growth of sample spacing away from sharp corners


def _edge_stations(length, target, r0, r1):
    """Normalized sample stations along one outline edge.

    Uniform spacing at ``target`` away from the ends; ends with a nonzero
    standoff get geometrically graded spacing instead, so samples on the two
    edges meeting at a sharp corner stay matched and keep each other's
    diametral disks empty.
    """
    def graded(r):
        ds = []
        if r > 0.0:
            d = min(r, length)
            while d < 0.5 * length:
                ds.append(d)
                if d >= target:
                    break
                d *= _GRADE
        return ds

    front = graded(r0)
    back = [length - d for d in graded(r1)]
    lo = front[-1] if front else 0.0
    hi = back[-1] if back else length
    mids = []
    gap = hi - lo
    if gap > target:
        n = int(math.ceil(gap / target - 1e-9))
        mids = [lo + gap * i / n for i in range(1, n)]
    ds = sorted(set(front + mids + back))
    # drop stations crowding the span ends or each other
    cleaned = []
    floor = 0.3 * target
    for d in ds:
        if d < floor or d > length - floor:
            continue
        if cleaned and d - cleaned[-1] < floor:
            continue
        cleaned.append(d)
    return [0.0] + [d / length for d in cleaned] + [1.0]


def _gabriel_split(points, sub_edges, sub_tags, h_min):
    """Split sub-edges until no other boundary point sits in a diametral disk.

    The empty-diametral-disk (Gabriel) property guarantees the sub-edge
    appears in the Delaunay triangulation of the point set. Splitting stops
    short of producing edges below ~h_min/3; the conformity check catches
    the rare leftover.
    """
    floor = 0.35 * h_min
    for _ in range(8):
        tree = cKDTree(np.array(points))
        changed = False
        for e in range(len(sub_edges)):
            a, b = sub_edges[e]
            pa, pb = points[a], points[b]
            mid = 0.5 * (pa + pb)
            radius = 0.5 * float(np.linalg.norm(pb - pa))
            if radius < floor:
                continue
            hits = tree.query_ball_point(mid, radius * 1.02)
            if any(h not in (a, b) for h in hits):
                points.append(mid)
                m = len(points) - 1
                tag = sub_tags[e]
                sub_edges[e] = (a, m)
                sub_edges.insert(e + 1, (m, b))
                sub_tags.insert(e + 1, tag)
                changed = True
        if not changed:
            break


def _share_endpoint(p0, p1, q0, q1) -> bool:
    for a in (p0, p1):
        for b in (q0, q1):
            if abs(a[0] - b[0]) < 1e-9 and abs(a[1] - b[1]) < 1e-9:
                return True
    return False


def _hex_lattice(bbox_min, bbox_max, spacing: float, shift: float) -> np.ndarray:
    dy = spacing * math.sqrt(3.0) / 2.0
    x0 = bbox_min[0] + (0.26 + shift) * spacing
    y0 = bbox_min[1] + (0.31 + shift) * spacing
    rows = []
    y = y0
    row = 0
    while y < bbox_max[1]:
        offset = 0.5 * spacing if row % 2 else 0.0
        xs = np.arange(x0 + offset, bbox_max[0], spacing)
        if len(xs):
            rows.append(np.column_stack([xs, np.full(len(xs), y)]))
        y += dy
        row += 1
    if not rows:
        return np.zeros((0, 2))
    return np.vstack(rows)


def triangulate(region, h_min: float = 1.0, h_max: float = 3.0) -> TriMesh2D:
    """Mesh a tagged region (or FingerOutline) with target edge sizes.

    Edge lengths land in [h_min, h_max] away from geometric features;
    near thin walls and sharp corners the sampling follows the local
    clearance instead. Raises :class:`MeshError` when the boundary cannot
    be recovered.
    """
    if isinstance(region, FingerOutline):
        region = region.region()
    if h_min <= 0 or h_max < h_min:
        raise MeshError("need 0 < h_min <= h_max")

    bpoints, sub_edges, sub_tags = _sample_boundary(region, h_min, h_max)
    spacing0 = min(h_max / 1.05, max(h_min, 0.5 * (h_min + h_max)))
    last_error = "unknown"
    point_list = [p for p in bpoints]
    for attempt in range(4):
        if attempt >= 1:
            # tiny features (near-tangent rib crossings) need splits below
            # the usual length floor to regain the Gabriel property
            _gabriel_split(point_list, sub_edges, sub_tags, h_min=0.0)
        bpoints = np.array(point_list)
        spacing = spacing0 * (0.8 ** max(0, attempt - 1))
        interior = _interior_points(region, bpoints, sub_edges, spacing,
                                    shift=0.13 * attempt)
        pts = np.vstack([bpoints, interior]) if len(interior) else bpoints
        mesh = _build_mesh(pts, region, sub_edges, sub_tags, len(bpoints))
        if mesh is not None:
            return mesh
        last_error = f"boundary recovery failed (attempt {attempt + 1})"
    raise MeshError(last_error)


def _interior_points(region, bpoints, sub_edges, spacing, shift):
    lo = bpoints.min(axis=0)
    hi = bpoints.max(axis=0)
    cand = _hex_lattice(lo, hi, spacing, shift)
    if not len(cand):
        return cand
    cand = cand[point_in_region(cand, region.outer, region.holes)]
    if not len(cand):
        return cand
    tree = cKDTree(cand)
    keep = np.ones(len(cand), dtype=bool)
    # no interior point inside the (slightly inflated) diametral disk of a sub-edge
    for a, b in sub_edges:
        mid = 0.5 * (bpoints[a] + bpoints[b])
        radius = 0.575 * np.linalg.norm(bpoints[b] - bpoints[a])
        for i in tree.query_ball_point(mid, radius):
            keep[i] = False
    # keep a clear annulus around boundary points as well
    btree = cKDTree(bpoints)
    near = btree.query_ball_point(cand, 0.55 * spacing)
    for i, hits in enumerate(near):
        if hits:
            keep[i] = False
    return cand[keep]


def _build_mesh(pts, region, sub_edges, sub_tags, n_boundary):
    tri = Delaunay(pts)
    simplices = tri.simplices
    cent = pts[simplices].mean(axis=1)
    inside = point_in_region(cent, region.outer, region.holes)
    simplices = simplices[inside]
    if not len(simplices):
        return None
    # enforce counter-clockwise orientation
    d1 = pts[simplices[:, 1]] - pts[simplices[:, 0]]
    d2 = pts[simplices[:, 2]] - pts[simplices[:, 0]]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = areas < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    if np.any(np.abs(areas) < 1e-12):
        return None

    counts = Counter()
    for t in simplices:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            counts[tuple(sorted((int(t[a]), int(t[b]))))] += 1
    mesh_boundary = {e for e, k in counts.items() if k == 1}
    if any(k > 2 for k in counts.values()):
        return None
    wanted = {tuple(sorted(e)): tag for e, tag in zip(sub_edges, sub_tags)}
    if set(wanted) != mesh_boundary:
        return None

    # drop unused points and remap indices
    used = np.unique(simplices)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices = pts[used]
    triangles = remap[simplices].astype(np.int32)
    boundary_edges = np.array([[remap[a], remap[b]] for a, b in sub_edges],
                              dtype=np.int32)
    tags = tuple(sub_tags)
    mount = np.unique(boundary_edges[[t == TAG_MOUNT for t in tags]]) \
        if TAG_MOUNT in tags else np.array([], dtype=np.int32)
    return TriMesh2D(vertices=vertices, triangles=triangles,
                     boundary_edges=boundary_edges, boundary_tags=tags,
                     mount_nodes=mount.astype(np.int32))


def mesh_rectangle(width: float, height: float, cell: float,
                   origin=(0.0, 0.0), crossed: bool = True,
                   left_tag: str = TAG_MOUNT) -> TriMesh2D:
    """Structured rectangle mesh; crossed (union-jack) cells by default.

    Crossed cells behave far better in bending for nearly incompressible
    plane strain than right-triangle splits, so validation beams use them.
    The left edge is tagged ``left_tag`` (mount by default), the remaining
    sides are tagged back_surface/contact_surface/tip for completeness.
    """
    from .outline import TAG_BACK, TAG_CONTACT, TAG_TIP

    nx = max(1, int(round(width / cell)))
    ny = max(1, int(round(height / cell)))
    xs = origin[0] + np.linspace(0.0, width, nx + 1)
    ys = origin[1] + np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    if crossed:
        centers = []
        k = len(pts)
        for i in range(nx):
            for j in range(ny):
                centers.append([(xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2])
        pts = np.vstack([pts, np.array(centers)])
        for i in range(nx):
            for j in range(ny):
                a, b = nid(i, j), nid(i + 1, j)
                c, d = nid(i + 1, j + 1), nid(i, j + 1)
                tris += [[a, b, k], [b, c, k], [c, d, k], [d, a, k]]
                k += 1
    else:
        for i in range(nx):
            for j in range(ny):
                a, b = nid(i, j), nid(i + 1, j)
                c, d = nid(i + 1, j + 1), nid(i, j + 1)
                tris += [[a, b, c], [a, c, d]]

    edges = []
    tags = []
    for j in range(ny):                                  # left edge, bottom-up
        edges.append((nid(0, j + 1), nid(0, j)))
        tags.append(left_tag)
    for i in range(nx):                                  # bottom edge
        edges.append((nid(i, 0), nid(i + 1, 0)))
        tags.append(TAG_BACK)
    for j in range(ny):                                  # right edge
        edges.append((nid(nx, j), nid(nx, j + 1)))
        tags.append(TAG_TIP)
    for i in range(nx):                                  # top edge
        edges.append((nid(i + 1, ny), nid(i, ny)))
        tags.append(TAG_CONTACT)
    boundary_edges = np.array(edges, dtype=np.int32)
    mount = np.unique(boundary_edges[[t == TAG_MOUNT for t in tags]]) \
        if TAG_MOUNT in tags else np.array([], dtype=np.int32)
    return TriMesh2D(vertices=pts, triangles=np.array(tris, dtype=np.int32),
                     boundary_edges=boundary_edges, boundary_tags=tuple(tags),
                     mount_nodes=mount.astype(np.int32))
