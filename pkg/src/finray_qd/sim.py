"""Quasi-static grip simulation of one finger against a rigid silhouette.

Scene frame: the finger sits in its rest pose (contact face on x = 0, mount
base on y = 0); the silhouette is placed by the caller on the negative-x
side. The mount node set ramps horizontally toward the object by ``stroke``
millimetres over ``grip_time`` seconds, then the scene is stepped until the
kinetic energy falls below the settle threshold (or a step cap is reached,
which marks the run as not converged). Element inversions and failed linear
solves also mark the run as not converged instead of raising.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .contact import (
    CircleSilhouette,
    ContactSummary,
    ConvexPolygonSilhouette,
    SelfContact,
    contact_forces,
)
from .design import FingerDesign
from .errors import ElementInversion, StepNotConverged
from .fem import DEFAULT_E, DEFAULT_NU, DEFAULT_RHO, FEModel, MaterialModel
from .mesh import TriMesh2D, triangulate
from .outline import TAG_CONTACT, finger_outline
from .solver import cg_solve


Silhouette = CircleSilhouette | ConvexPolygonSilhouette


def _accumulate_blocks(acc, blocks, n_nodes):
    """Sum (node, 2x2) block lists into an (n, 2, 2) array (lazily created)."""
    if not blocks:
        return acc
    if acc is None:
        acc = np.zeros((n_nodes, 2, 2))
    for node, block in blocks:
        acc[node] += block
    return acc


@dataclass(frozen=True)
class SimConfig:
    """Time stepping, solver, contact and meshing parameters.

    ``settle_ke_threshold`` is in joules; everything else uses the package's
    mm-N-s unit system directly.
    """

    dt: float = 0.005                        # s
    cg_tol: float = 1e-6
    cg_maxiter: int = 1000
    rayleigh_alpha: float = 1.0              # 1/s
    rayleigh_beta: float = 0.01              # s
    penalty_stiffness: float = 10.0          # N/mm
    friction_mu: float = 0.8
    friction_regularization_velocity: float = 1.0   # mm/s
    contact_damping_beta: float = 0.01              # s; normal damping = beta * k_c
    h_min: float = 1.0                       # mm
    h_max: float = 3.0                       # mm
    grip_time: float = 1.0                   # s
    settle_ke_threshold: float = 1e-8        # J
    settle_max_steps: int = 400
    self_contact: bool = True
    self_contact_threshold: float = 0.5      # mm
    gravity: tuple[float, float] = (0.0, 0.0)  # mm/s^2, off by default

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.cg_tol <= 0 or self.cg_maxiter < 1:
            raise ValueError("cg_tol must be positive and cg_maxiter >= 1")
        if not 0 < self.h_min <= self.h_max:
            raise ValueError("need 0 < h_min <= h_max")

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class DynamicState:
    """Positions and velocities of every mesh node at one instant."""

    positions: np.ndarray     # (n, 2) mm
    velocities: np.ndarray    # (n, 2) mm/s
    time: float               # s

    def __post_init__(self):
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have equal shapes")
        if not (np.all(np.isfinite(self.positions))
                and np.all(np.isfinite(self.velocities))):
            raise ValueError("state contains non-finite entries")
        self.positions.setflags(write=False)
        self.velocities.setflags(write=False)


def default_material(thickness: float) -> MaterialModel:
    return MaterialModel(E=DEFAULT_E, nu=DEFAULT_NU, rho=DEFAULT_RHO,
                         thickness=thickness)


class FingerSimContext:
    """Per-finger objects reusable across grip scenes: mesh, FE model,
    self-contact pair table, fixed sparsity maps, rest preconditioner.

    Contact and self-contact only ever add 2x2 diagonal node blocks, which
    already exist in the element stiffness pattern, so the system matrix
    keeps one fixed CSR pattern for the scene's whole lifetime.
    """

    def __init__(self, mesh: TriMesh2D, material: MaterialModel, cfg: SimConfig):
        self.mesh = mesh
        self.material = material
        self.model = FEModel(mesh, material)
        self.contact_nodes = mesh.boundary_nodes(TAG_CONTACT)
        self.self_contact = SelfContact(
            mesh.vertices, mesh.boundary_edges,
            threshold=cfg.self_contact_threshold,
            stiffness=cfg.penalty_stiffness) if cfg.self_contact else None

        model = self.model
        ndof = model.n_dofs
        self.free_mask = np.ones(ndof, dtype=bool)
        pn = mesh.mount_nodes
        self.free_mask[2 * pn] = False
        self.free_mask[2 * pn + 1] = False
        self.prescribed_dofs = np.where(~self.free_mask)[0]
        self.kept_slots, self.ff_indices, self.ff_indptr = \
            model.free_submatrix_pattern(self.free_mask)
        self.n_free = int(self.free_mask.sum())
        block_slots = model.node_block_slots(np.arange(model.n_nodes))
        self.block_slots_flat = block_slots.reshape(-1)
        self.diag_slots = np.empty(ndof, dtype=np.int64)
        self.diag_slots[0::2] = block_slots[:, 0]
        self.diag_slots[1::2] = block_slots[:, 3]

        _f0, self.rest_k_data = model.internal_forces_data(mesh.vertices)
        self.rest_preconditioner = self.factorize(
            self.system_data(self.rest_k_data, None, cfg))

    def system_data(self, k_data, damping_blocks, cfg: SimConfig):
        """Data array of A = (1 + dt a) M + (dt b + dt^2) K + dt C_blocks."""
        dt = cfg.dt
        a_data = (dt * cfg.rayleigh_beta + dt * dt) * k_data
        if damping_blocks is not None:
            a_data[self.block_slots_flat] += dt * damping_blocks.reshape(-1)
        a_data[self.diag_slots] += (1.0 + dt * cfg.rayleigh_alpha) * self.model.mass_dofs
        return a_data

    def free_csr(self, a_data):
        import scipy.sparse as sp

        return sp.csr_matrix((a_data[self.kept_slots], self.ff_indices,
                              self.ff_indptr), shape=(self.n_free, self.n_free))

    def factorize(self, a_data):
        from scipy.sparse.linalg import splu

        return splu(self.free_csr(a_data).tocsc()).solve

    @classmethod
    def for_finger(cls, finger: FingerDesign, cfg: SimConfig,
                   material: MaterialModel | None = None) -> "FingerSimContext":
        mesh = triangulate(finger_outline(finger), cfg.h_min, cfg.h_max)
        if material is None:
            material = default_material(finger.W)
        return cls(mesh, material, cfg)


class GripScene:
    """Stepping machinery shared by grip_simulation and the tests."""

    def __init__(self, mesh: TriMesh2D, material: MaterialModel,
                 silhouette: Silhouette | None, cfg: SimConfig,
                 context: FingerSimContext | None = None):
        if context is None:
            context = FingerSimContext(mesh, material, cfg)
        self.ctx = context
        self.mesh = context.mesh
        self.cfg = cfg
        self.model = context.model
        self.silhouette = silhouette
        self.contact_nodes = context.contact_nodes
        self.positions = self.mesh.vertices.copy()
        self.velocities = np.zeros_like(self.positions)
        self.time = 0.0
        self.gravity = self.model.gravity_forces(cfg.gravity)
        self.last_summary = ContactSummary(0.0, (), True)
        self.last_cg_iterations = 0
        self._warm = None
        self.self_contact = context.self_contact
        self._precond = context.rest_preconditioner

    def state(self) -> DynamicState:
        return DynamicState(self.positions.copy(), self.velocities.copy(), self.time)

    def step(self, mount_velocity=(0.0, 0.0)) -> None:
        """Advance by one dt with the mount moving at the given velocity.

        Assembles the corotational stiffness data into the fixed CSR
        pattern, folds contact/self-contact node blocks in place, and solves

            (M + dt (a M + b K + C) + dt^2 K) dv = dt (f - dt K v) - A dv_p

        on the free dofs, with all velocity-dependent force values
        (Rayleigh, friction, contact damping) already inside f. This is the
        same update as :func:`finray_qd.solver.implicit_euler_step`, run on
        precomputed sparsity maps instead of generic sparse arithmetic.
        """
        cfg = self.cfg
        ctx = self.ctx
        model = self.model
        n = model.n_nodes
        f_int, k_data = model.internal_forces_data(self.positions)
        force = f_int + self.gravity

        acc_k = None
        acc_c = None
        if self.silhouette is not None:
            f_c, kb, cb, summary = contact_forces(
                self.positions, self.velocities, self.contact_nodes,
                self.silhouette, penalty_stiffness=cfg.penalty_stiffness,
                friction_mu=cfg.friction_mu,
                friction_regularization_velocity=cfg.friction_regularization_velocity,
                normal_damping=cfg.contact_damping_beta * cfg.penalty_stiffness)
            force += f_c
            acc_k = _accumulate_blocks(acc_k, kb, n)
            acc_c = _accumulate_blocks(acc_c, cb, n)
            self.last_summary = summary
        if self.self_contact is not None:
            f_s, kb = self.self_contact.forces(self.positions)
            force += f_s
            acc_k = _accumulate_blocks(acc_k, kb, n)
        if acc_k is not None:
            k_data[ctx.block_slots_flat] += acc_k.reshape(-1)

        K = model.stiffness_csr(k_data)
        v = self.velocities.ravel()
        Kv = K @ v
        # Rayleigh and contact damping force values at the current state
        force = force - (cfg.rayleigh_alpha * (model.mass_dofs * v)
                         + cfg.rayleigh_beta * Kv).reshape(-1, 2)
        if acc_c is not None:
            force = force - np.einsum("nij,nj->ni", acc_c, self.velocities)
        rhs = cfg.dt * (force.ravel() - cfg.dt * Kv)

        a_data = ctx.system_data(k_data, acc_c, cfg)
        dv = np.zeros(model.n_dofs)
        pvel = np.asarray(mount_velocity, dtype=float)
        dv[ctx.prescribed_dofs[0::2]] = pvel[0] - v[ctx.prescribed_dofs[0::2]]
        dv[ctx.prescribed_dofs[1::2]] = pvel[1] - v[ctx.prescribed_dofs[1::2]]
        if np.any(dv):
            rhs = rhs - model.stiffness_csr(a_data) @ dv
        rhs_free = rhs[ctx.free_mask]

        result = cg_solve(ctx.free_csr(a_data), rhs_free, tol=cfg.cg_tol,
                          maxiter=cfg.cg_maxiter, preconditioner=self._precond,
                          x0=self._warm)
        if not result.converged:
            raise StepNotConverged(result.residual)
        self._warm = result.x.copy()
        dv[ctx.free_mask] = result.x
        self.velocities = (v + dv).reshape(-1, 2)
        self.positions = self.positions + cfg.dt * self.velocities
        self.time += cfg.dt
        self.last_cg_iterations = result.iterations
        if result.iterations > 20:
            # rotations/contact drifted far from the factorized state
            self._precond = ctx.factorize(a_data)

    def kinetic_energy_joules(self) -> float:
        return self.model.kinetic_energy(self.velocities) * 1e-3

    def tip_position(self):
        tip = int(np.argmax(self.mesh.vertices[:, 1]))
        return self.positions[tip]

    def contact_summary(self) -> ContactSummary:
        """Contact state recomputed at the current positions."""
        if self.silhouette is None:
            return ContactSummary(0.0, (), True)
        _f, _kb, _cb, summary = contact_forces(
            self.positions, self.velocities, self.contact_nodes,
            self.silhouette, penalty_stiffness=self.cfg.penalty_stiffness,
            friction_mu=self.cfg.friction_mu,
            friction_regularization_velocity=self.cfg.friction_regularization_velocity)
        return summary


def grip_simulation(finger: FingerDesign, silhouette: Silhouette,
                    stroke: float, cfg: SimConfig = SimConfig(), *,
                    material: MaterialModel | None = None,
                    context: FingerSimContext | None = None,
                    on_step=None, trace_csv=None) -> ContactSummary:
    """Close one finger onto a silhouette and return the settled contact.

    The mount ramps by ``stroke`` mm in -x over ``cfg.grip_time``, then the
    scene settles. Mesh/geometry errors propagate; simulation failures
    (element inversion, solver caps) return ``converged=False``. Passing a
    prebuilt ``context`` skips meshing and model setup.
    """
    if stroke < 0:
        raise ValueError("stroke must be non-negative")
    if context is None:
        context = FingerSimContext.for_finger(finger, cfg, material)
    scene = GripScene(context.mesh, context.material, silhouette, cfg,
                      context=context)
    trace = [] if trace_csv is not None else None

    n_ramp = max(1, int(round(cfg.grip_time / cfg.dt)))
    ramp_v = (-stroke / (n_ramp * cfg.dt), 0.0)
    failed = False
    settled = False
    try:
        for _ in range(n_ramp):
            scene.step(ramp_v if stroke > 0 else (0.0, 0.0))
            _record(scene, trace, on_step)
        for _ in range(cfg.settle_max_steps):
            if scene.kinetic_energy_joules() < cfg.settle_ke_threshold:
                settled = True
                break
            scene.step((0.0, 0.0))
            _record(scene, trace, on_step)
        else:
            settled = scene.kinetic_energy_joules() < cfg.settle_ke_threshold
    except (ElementInversion, StepNotConverged):
        failed = True

    if trace_csv is not None:
        with open(trace_csv, "w") as fh:
            fh.write("time,tip_x,tip_y,total_normal_force,cg_iterations\n")
            for row in trace:
                fh.write(",".join(repr(x) for x in row) + "\n")

    summary = scene.last_summary if failed else scene.contact_summary()
    return ContactSummary(total_normal_force=summary.total_normal_force,
                          contact_nodes=summary.contact_nodes,
                          converged=not failed and settled)


def _record(scene, trace, on_step):
    if on_step is not None:
        on_step(scene)
    if trace is not None:
        tip = scene.tip_position()
        trace.append((scene.time, float(tip[0]), float(tip[1]),
                      scene.last_summary.total_normal_force,
                      scene.last_cg_iterations))
