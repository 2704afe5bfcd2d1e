"""Corotational linear-triangle finite elements, plane strain.

Unit system: mm, N, s. Stress and elastic modulus in MPa (N/mm^2), mass in
tonnes (1 t = 1e3 kg) so that F = m a holds with mm/s^2 accelerations, and
energy in N*mm (1 N*mm = 1e-3 J). Densities are given in kg/m^3 at the API
surface and converted internally (1 kg/m^3 = 1e-12 t/mm^3).

Each element factors the rotation out of its deformation gradient (2D polar
decomposition) and applies the small-strain plane-strain stiffness in the
unrotated frame, which keeps the response exact under rigid motions. The
assembled tangent uses the constant-rotation approximation R K R^T, which is
symmetric positive semi-definite and matches the exact Jacobian at the rest
state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ElementInversion
from .mesh import TriMesh2D

KG_PER_M3_TO_T_PER_MM3 = 1e-12
GRAVITY_M_S2 = 9.81

#: Reference material: shore 85A photopolymer fit to a linear elastic model.
DEFAULT_E = 11.6            # MPa
DEFAULT_NU = 0.49
DEFAULT_RHO = 1150.0        # kg/m^3


@dataclass(frozen=True)
class MaterialModel:
    """Linear elastic plane-strain material with out-of-plane thickness."""

    E: float                 # elastic modulus, MPa
    nu: float                # Poisson ratio
    rho: float               # density, kg/m^3
    thickness: float         # out-of-plane depth, mm (finger W)

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError("E must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("nu must lie in [0, 0.5)")
        if self.rho <= 0 or self.thickness <= 0:
            raise ValueError("rho and thickness must be positive")

    def plane_strain_matrix(self) -> np.ndarray:
        c = self.E / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        n = self.nu
        return c * np.array([
            [1.0 - n, n, 0.0],
            [n, 1.0 - n, 0.0],
            [0.0, 0.0, 0.5 * (1.0 - 2.0 * n)],
        ])


def element_stiffness(coords: np.ndarray, material: MaterialModel) -> np.ndarray:
    """6x6 plane-strain stiffness of one linear triangle (rest coords 3x2)."""
    x, y = coords[:, 0], coords[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area2 = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
    if area2 <= 0:
        raise ValueError("element has non-positive area")
    B = np.zeros((3, 6))
    B[0, 0::2] = b
    B[1, 1::2] = c
    B[2, 0::2] = c
    B[2, 1::2] = b
    B /= area2
    D = material.plane_strain_matrix()
    return material.thickness * (0.5 * area2) * B.T @ D @ B


class FEModel:
    """Precomputed element data plus corotational assembly for one mesh."""

    def __init__(self, mesh: TriMesh2D, material: MaterialModel):
        self.mesh = mesh
        self.material = material
        tri = mesh.triangles
        v = mesh.vertices
        self.n_nodes = len(v)
        self.n_dofs = 2 * self.n_nodes

        d1 = v[tri[:, 1]] - v[tri[:, 0]]
        d2 = v[tri[:, 2]] - v[tri[:, 0]]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            raise ValueError("mesh contains inverted rest elements")
        self.rest_areas = 0.5 * det
        # inverse of the rest edge matrix Dm = [d1 d2]
        self._dm_inv = np.empty((len(tri), 2, 2))
        self._dm_inv[:, 0, 0] = d2[:, 1]
        self._dm_inv[:, 0, 1] = -d2[:, 0]
        self._dm_inv[:, 1, 0] = -d1[:, 1]
        self._dm_inv[:, 1, 1] = d1[:, 0]
        self._dm_inv /= det[:, None, None]

        self._ke = np.stack([element_stiffness(v[t], material) for t in tri])

        dofs = np.empty((len(tri), 6), dtype=np.int64)
        dofs[:, 0::2] = 2 * tri
        dofs[:, 1::2] = 2 * tri + 1
        self._dofs = dofs
        rows = np.repeat(dofs, 6, axis=1).ravel()
        cols = np.tile(dofs, (1, 6)).ravel()
        # fixed CSR sparsity pattern; per-step assembly only fills data
        keys = rows * self.n_dofs + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        self._slots = inverse
        self._nnz = len(uniq)
        csr_rows = uniq // self.n_dofs
        self._csr_indices = (uniq % self.n_dofs).astype(np.int32)
        self._csr_indptr = np.searchsorted(csr_rows, np.arange(self.n_dofs + 1)).astype(np.int32)

        rho_t = material.rho * KG_PER_M3_TO_T_PER_MM3
        node_mass = np.zeros(self.n_nodes)
        m_el = rho_t * self.rest_areas * material.thickness / 3.0
        np.add.at(node_mass, tri[:, 0], m_el)
        np.add.at(node_mass, tri[:, 1], m_el)
        np.add.at(node_mass, tri[:, 2], m_el)
        self.node_mass = node_mass              # tonnes, lumped
        self.mass_dofs = np.repeat(node_mass, 2)
        self.total_mass = float(node_mass.sum())

    def _rotations(self, positions: np.ndarray):
        """Per-element rotation (cos, sin) from the polar decomposition."""
        tri = self.mesh.triangles
        d1 = positions[tri[:, 1]] - positions[tri[:, 0]]
        d2 = positions[tri[:, 2]] - positions[tri[:, 0]]
        ds = np.empty((len(tri), 2, 2))
        ds[:, :, 0] = d1
        ds[:, :, 1] = d2
        F = ds @ self._dm_inv
        det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
        bad = np.where(det <= 1e-10)[0]
        if bad.size:
            raise ElementInversion(bad)
        a = F[:, 0, 0] + F[:, 1, 1]
        b = F[:, 1, 0] - F[:, 0, 1]
        r = np.hypot(a, b)
        small = np.where(r < 1e-12)[0]
        if small.size:
            raise ElementInversion(small)
        return a / r, b / r

    def _local_displacements(self, positions, cos, sin):
        tri = self.mesh.triangles
        rest = self.mesh.vertices
        u = np.empty((len(tri), 6))
        for k in range(3):
            px = positions[tri[:, k], 0]
            py = positions[tri[:, k], 1]
            # R^T p  (rotate current coords back to the unrotated frame)
            u[:, 2 * k] = cos * px + sin * py - rest[tri[:, k], 0]
            u[:, 2 * k + 1] = -sin * px + cos * py - rest[tri[:, k], 1]
        return u

    def internal_forces_data(self, positions: np.ndarray,
                             with_stiffness: bool = True):
        """Like :meth:`internal_forces` but returns the raw CSR data array
        for the fixed sparsity pattern (``csr_indices``/``csr_indptr``)."""
        cos, sin = self._rotations(positions)
        u_loc = self._local_displacements(positions, cos, sin)
        f_loc = np.einsum("eij,ej->ei", self._ke, u_loc)

        f = np.zeros((self.n_nodes, 2))
        tri = self.mesh.triangles
        for k in range(3):
            fx = cos * f_loc[:, 2 * k] - sin * f_loc[:, 2 * k + 1]
            fy = sin * f_loc[:, 2 * k] + cos * f_loc[:, 2 * k + 1]
            np.add.at(f[:, 0], tri[:, k], -fx)
            np.add.at(f[:, 1], tri[:, k], -fy)
        if not with_stiffness:
            return f, None

        # K_rot = Rb Ke Rb^T with Rb = blockdiag(R, R, R)
        R6 = np.zeros((len(tri), 6, 6))
        for k in range(3):
            R6[:, 2 * k, 2 * k] = cos
            R6[:, 2 * k, 2 * k + 1] = -sin
            R6[:, 2 * k + 1, 2 * k] = sin
            R6[:, 2 * k + 1, 2 * k + 1] = cos
        k_rot = R6 @ self._ke @ R6.transpose(0, 2, 1)
        data = np.bincount(self._slots, weights=k_rot.ravel(), minlength=self._nnz)
        return f, data

    def stiffness_csr(self, data: np.ndarray) -> sp.csr_matrix:
        """Wrap a data array from :meth:`internal_forces_data` as CSR."""
        return sp.csr_matrix((data, self._csr_indices, self._csr_indptr),
                             shape=(self.n_dofs, self.n_dofs))

    def internal_forces(self, positions: np.ndarray,
                        with_stiffness: bool = True):
        """Nodal internal forces (n, 2) and the tangent stiffness (CSR).

        Forces oppose deformation: they vanish for any rigid motion of the
        rest configuration. Raises :class:`ElementInversion` when an element
        turns inside out.
        """
        f, data = self.internal_forces_data(positions, with_stiffness)
        if data is None:
            return f, None
        return f, self.stiffness_csr(data)

    def node_block_slots(self, nodes) -> np.ndarray:
        """CSR data slots of the 2x2 diagonal block of each node, (k, 4):
        entries (2i,2i), (2i,2i+1), (2i+1,2i), (2i+1,2i+1). Every node has
        all four slots because it belongs to at least one element."""
        nodes = np.asarray(nodes, dtype=np.int64)
        out = np.empty((len(nodes), 4), dtype=np.int64)
        for k, node in enumerate(nodes):
            for m, (r, c) in enumerate(((2 * node, 2 * node),
                                        (2 * node, 2 * node + 1),
                                        (2 * node + 1, 2 * node),
                                        (2 * node + 1, 2 * node + 1))):
                lo, hi = self._csr_indptr[r], self._csr_indptr[r + 1]
                pos = np.searchsorted(self._csr_indices[lo:hi], c)
                if pos >= hi - lo or self._csr_indices[lo + pos] != c:
                    raise KeyError(f"missing diagonal block slot ({r}, {c})")
                out[k, m] = lo + pos
        return out

    def free_submatrix_pattern(self, free_dofs_mask: np.ndarray):
        """(kept K-slot indices, ff_indices, ff_indptr) for the free-dof
        submatrix. K data gathered by the kept slots in order is exactly the
        CSR data of the submatrix."""
        rows = np.repeat(np.arange(self.n_dofs),
                         np.diff(self._csr_indptr))
        cols = self._csr_indices
        keep = free_dofs_mask[rows] & free_dofs_mask[cols]
        renum = np.cumsum(free_dofs_mask) - 1
        ff_rows = renum[rows[keep]]
        ff_cols = renum[cols[keep]].astype(np.int32)
        n_free = int(free_dofs_mask.sum())
        ff_indptr = np.searchsorted(ff_rows, np.arange(n_free + 1)).astype(np.int32)
        return np.where(keep)[0], ff_cols, ff_indptr

    def elastic_energy(self, positions: np.ndarray) -> float:
        """Stored energy in N*mm for the corotational small-strain model."""
        cos, sin = self._rotations(positions)
        u_loc = self._local_displacements(positions, cos, sin)
        return 0.5 * float(np.einsum("ei,eij,ej->", u_loc, self._ke, u_loc))

    def kinetic_energy(self, velocities: np.ndarray) -> float:
        """Kinetic energy in N*mm from the lumped mass matrix."""
        return 0.5 * float(np.sum(self.node_mass * np.sum(velocities ** 2, axis=1)))

    def gravity_forces(self, gravity_mm_s2) -> np.ndarray:
        """Nodal weight vector for a gravity acceleration in mm/s^2."""
        g = np.asarray(gravity_mm_s2, dtype=float)
        return self.node_mass[:, None] * g[None, :]


def assemble(mesh: TriMesh2D, material: MaterialModel, positions: np.ndarray,
             external_forces: np.ndarray | None = None):
    """One-shot assembly: (total force vector (n, 2), tangent stiffness CSR).

    Convenience wrapper over :class:`FEModel` for callers that do not step
    repeatedly on the same mesh.
    """
    model = FEModel(mesh, material)
    f, K = model.internal_forces(positions)
    if external_forces is not None:
        f = f + external_forces
    return f, K
