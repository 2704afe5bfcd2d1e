"""Penalty contact against rigid silhouettes, plus finger self-contact.

Contact forces act on boundary nodes of the contact surface: a penetrating
node feels a normal force k_c * depth along the silhouette's outward normal
at its closest boundary point, and a regularized Coulomb friction force
tangentially, capped at mu times the normal force. The force Jacobians
(normal stiffness blocks and friction damping blocks) are returned so the
time stepper can treat the stiff penalty implicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geom import point_in_polygon


@dataclass(frozen=True)
class CircleSilhouette:
    """Rigid circle in the finger plane."""

    center: tuple[float, float]
    radius: float

    @property
    def r_max(self) -> float:
        return self.radius

    def shifted(self, offset) -> "CircleSilhouette":
        return CircleSilhouette((self.center[0] + offset[0],
                                 self.center[1] + offset[1]), self.radius)

    def penetrations(self, points: np.ndarray):
        d = points - np.asarray(self.center)
        dist = np.linalg.norm(d, axis=1)
        depth = self.radius - dist
        hit = (depth > 0.0) & (dist > 1e-12)
        normals = np.zeros_like(d)
        normals[hit] = d[hit] / dist[hit, None]
        return depth, normals, hit


@dataclass(frozen=True)
class ConvexPolygonSilhouette:
    """Rigid convex polygon (counter-clockwise vertices)."""

    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        self.vertices.setflags(write=False)

    @property
    def r_max(self) -> float:
        return float(np.max(np.abs(self.vertices[:, 0])))

    def shifted(self, offset) -> "ConvexPolygonSilhouette":
        return ConvexPolygonSilhouette(self.vertices + np.asarray(offset))

    def penetrations(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        inside = point_in_polygon(pts, self.vertices)
        depth = np.zeros(len(pts))
        normals = np.zeros_like(pts)
        if inside.any():
            v = self.vertices
            w = np.roll(v, -1, axis=0)
            idx = np.where(inside)[0]
            p = pts[idx]
            best = np.full(len(idx), np.inf)
            closest = np.zeros((len(idx), 2))
            for a, b in zip(v, w):
                ab = b - a
                t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
                proj = a + t[:, None] * ab
                d = np.linalg.norm(p - proj, axis=1)
                better = d < best
                best[better] = d[better]
                closest[better] = proj[better]
            ok = best > 1e-12
            depth[idx[ok]] = best[ok]
            normals[idx[ok]] = (closest[ok] - p[ok]) / best[ok, None]
        return depth, normals, depth > 0.0


@dataclass(frozen=True)
class ContactSummary:
    """Aggregate of a settled contact state."""

    total_normal_force: float                        # N
    contact_nodes: tuple                             # (node, normal force N, point mm)
    converged: bool

    @property
    def any_contact(self) -> bool:
        return self.total_normal_force > 0.0


def contact_forces(positions, velocities, node_indices, silhouette, *,
                   penalty_stiffness: float, friction_mu: float,
                   friction_regularization_velocity: float = 1.0,
                   normal_damping: float = 0.0, converged: bool = True):
    """Penalty contact forces for the given candidate nodes.

    The normal force is ``k_c * depth`` (reduced by ``normal_damping * v_n``
    when approaching fast, never below zero: no adhesion). The tangential
    force is regularized Coulomb friction, ``-mu f_n sat(v_t / v_reg)``,
    written as a viscous force ``-eta v_t`` with ``eta = mu f_n /
    max(v_reg, |v_t|)`` so it carries an implicit damping block in both the
    stick and the sliding regime; that keeps sliding nodes from chattering.

    Returns (forces (n, 2), stiffness blocks, damping blocks, summary) where
    the block lists hold (node index, 2x2 matrix) pairs for the implicit
    solve. The reaction on the silhouette is minus the sum of nodal forces.
    """
    n = len(positions)
    forces = np.zeros((n, 2))
    k_blocks: list[tuple[int, np.ndarray]] = []
    c_blocks: list[tuple[int, np.ndarray]] = []
    contact_nodes = []
    idx = np.asarray(node_indices, dtype=int)
    if len(idx) == 0:
        return forces, k_blocks, c_blocks, ContactSummary(0.0, (), converged)
    pts = positions[idx]
    depth, normals, hit = silhouette.penetrations(pts)
    v_reg = max(friction_regularization_velocity, 1e-9)
    for local in np.where(hit)[0]:
        node = int(idx[local])
        nvec = normals[local]
        vn = float(velocities[node] @ nvec)
        fn = penalty_stiffness * depth[local]
        fn_dynamic = max(0.0, fn - normal_damping * vn)
        forces[node] += fn_dynamic * nvec
        k_blocks.append((node, penalty_stiffness * np.outer(nvec, nvec)))
        if normal_damping > 0.0:
            c_blocks.append((node, normal_damping * np.outer(nvec, nvec)))
        tvec = np.array([-nvec[1], nvec[0]])
        vt = float(velocities[node] @ tvec)
        eta = friction_mu * fn / max(v_reg, abs(vt))
        forces[node] += -eta * vt * tvec
        c_blocks.append((node, eta * np.outer(tvec, tvec)))
        contact_nodes.append((node, float(fn), (float(pts[local, 0]), float(pts[local, 1]))))
    total = float(sum(fn for _, fn, _ in contact_nodes))
    summary = ContactSummary(total_normal_force=total,
                             contact_nodes=tuple(contact_nodes),
                             converged=converged)
    return forces, k_blocks, c_blocks, summary


class SelfContact:
    """Vectorized node-versus-segment self-collision for one boundary.

    Candidate pairs are fixed up front: every boundary node against every
    boundary segment at least ``exclude_hops`` edges away along the boundary
    graph and within ``cutoff`` of it at rest. Each pair activates below its
    own gap, ``min(threshold, 0.8 * rest distance)``, so bodies whose rest
    geometry is already tight (thin walls, narrowing pockets) stay exactly
    force-free until they actually start closing.
    """

    def __init__(self, rest_positions, boundary_edges, *, threshold: float = 0.5,
                 stiffness: float = 10.0, exclude_hops: int = 2,
                 cutoff: float | None = None, scale_by_rest_gap: bool = True):
        rest = np.asarray(rest_positions, dtype=float)
        self.rest = rest
        edges = np.asarray(boundary_edges, dtype=int).reshape(-1, 2)
        self.edges = edges
        self.threshold = float(threshold)
        self.stiffness = float(stiffness)
        if cutoff is None:
            cutoff = threshold + 12.0
        if not len(edges):
            self._empty()
            return

        bnodes = np.unique(edges)
        # rest distance of every boundary node to every boundary segment
        a = rest[edges[:, 0]]
        b = rest[edges[:, 1]]
        ab = b - a
        denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
        p = rest[bnodes]
        t = np.clip(((p[:, None, :] - a[None]) * ab[None]).sum(-1) / denom[None],
                    0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        d0 = np.linalg.norm(p[:, None, :] - proj, axis=-1)       # (n_bnodes, n_edges)

        # exclude segments within exclude_hops of each node along the boundary
        neighbors: dict[int, set[int]] = {}
        for ea, eb in edges:
            neighbors.setdefault(int(ea), set()).add(int(eb))
            neighbors.setdefault(int(eb), set()).add(int(ea))
        node_row = {int(nd): r for r, nd in enumerate(bnodes)}
        edge_lookup: dict[int, list[int]] = {}
        for e, (ea, eb) in enumerate(edges):
            edge_lookup.setdefault(int(ea), []).append(e)
            edge_lookup.setdefault(int(eb), []).append(e)
        for nd in bnodes:
            near = {int(nd)}
            frontier = {int(nd)}
            for _ in range(exclude_hops):
                nxt: set[int] = set()
                for v in frontier:
                    nxt |= neighbors.get(v, set())
                frontier = nxt - near
                near |= nxt
            row = node_row[int(nd)]
            for v in near:
                for e in edge_lookup.get(v, ()):
                    d0[row, e] = np.inf

        rows, cols = np.where((d0 < cutoff) & (d0 > 1e-9))
        order = np.argsort(d0[rows, cols], kind="stable")
        rows, cols = rows[order], cols[order]
        self.pair_node = bnodes[rows].astype(int)
        self.pair_a = edges[cols, 0]
        self.pair_b = edges[cols, 1]
        self.pair_d0 = d0[rows, cols]
        if scale_by_rest_gap:
            self.pair_gap = np.minimum(self.threshold, 0.8 * self.pair_d0)
        else:
            self.pair_gap = np.full(len(rows), self.threshold)

    def _empty(self):
        self.pair_node = np.zeros(0, dtype=int)
        self.pair_a = np.zeros(0, dtype=int)
        self.pair_b = np.zeros(0, dtype=int)
        self.pair_d0 = np.zeros(0)
        self.pair_gap = np.zeros(0)

    def _candidates(self, positions) -> np.ndarray:
        """Pair indices that could be active: the rest distance minus the
        node's and the segment's deformation (rigid translation removed)
        still undercuts the pair gap. Everything else is provably clear."""
        if not len(self.pair_node):
            return np.zeros(0, dtype=int)
        disp = positions - self.rest
        dev = disp - disp.mean(axis=0)
        dev_norm = np.sqrt(np.einsum("ij,ij->i", dev, dev))
        seg_dev = np.maximum(dev_norm[self.pair_a], dev_norm[self.pair_b])
        bound = self.pair_d0 - dev_norm[self.pair_node] - seg_dev
        return np.where(bound < self.pair_gap)[0]

    def _distances(self, positions, which):
        p = positions[self.pair_node[which]]
        a = positions[self.pair_a[which]]
        b = positions[self.pair_b[which]]
        ab = b - a
        denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        diff = p - proj
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return t, diff, d

    def forces(self, positions):
        """(forces (n, 2), stiffness blocks) at the given configuration."""
        n = len(positions)
        forces = np.zeros((n, 2))
        k_blocks: list[tuple[int, np.ndarray]] = []
        which = self._candidates(positions)
        if not len(which):
            return forces, k_blocks
        t, diff, d = self._distances(positions, which)
        active = (d < self.pair_gap[which]) & (d > 1e-12)
        for local in np.where(active)[0]:
            k = which[local]
            nvec = diff[local] / d[local]
            fmag = self.stiffness * (self.pair_gap[k] - d[local])
            node, na, nb = int(self.pair_node[k]), int(self.pair_a[k]), int(self.pair_b[k])
            tk = float(t[local])
            forces[node] += fmag * nvec
            forces[na] += -(1.0 - tk) * fmag * nvec
            forces[nb] += -tk * fmag * nvec
            kb = self.stiffness * np.outer(nvec, nvec)
            k_blocks.append((node, kb))
            k_blocks.append((na, (1.0 - tk) * kb))
            k_blocks.append((nb, tk * kb))
        return forces, k_blocks

    def min_pair_distance(self, positions) -> float:
        """Smallest node-to-segment distance over all candidate pairs."""
        if not len(self.pair_node):
            return float("inf")
        _t, _diff, d = self._distances(positions, np.arange(len(self.pair_node)))
        return float(d.min())


def self_contact_forces(positions, boundary_edges, *, threshold: float = 0.5,
                        stiffness: float = 10.0, exclude_hops: int = 2,
                        rest_positions=None):
    """One-shot self-contact evaluation (see :class:`SelfContact`).

    Without ``rest_positions`` the plain threshold applies to every
    non-adjacent pair; with them, rest-tight pairs get scaled gaps.
    """
    rest = positions if rest_positions is None else rest_positions
    model = SelfContact(rest, boundary_edges, threshold=threshold,
                        stiffness=stiffness, exclude_hops=exclude_hops,
                        scale_by_rest_gap=rest_positions is not None)
    return model.forces(positions)


def blocks_to_matrix(blocks, n_nodes: int) -> sp.csr_matrix:
    """Assemble (node, 2x2) diagonal blocks into a sparse (2n x 2n) matrix."""
    ndof = 2 * n_nodes
    if not blocks:
        return sp.csr_matrix((ndof, ndof))
    acc: dict[int, np.ndarray] = {}
    for node, block in blocks:
        if node in acc:
            acc[node] = acc[node] + block
        else:
            acc[node] = np.asarray(block, dtype=float)
    nodes = np.array(sorted(acc), dtype=np.int64)
    vals = np.stack([acc[n] for n in nodes]).reshape(-1)
    rows = (2 * np.repeat(nodes, 4) + np.tile([0, 0, 1, 1], len(nodes)))
    cols = (2 * np.repeat(nodes, 4) + np.tile([0, 1, 0, 1], len(nodes)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(ndof, ndof))
