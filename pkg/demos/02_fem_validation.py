"""Finite-element sanity: mesh a finger, validate bending against beam theory.

Run:  python demos/02_fem_validation.py
"""
import numpy as np

from finray_qd import benchmark_design, finger_outline, mesh_rectangle, triangulate
from finray_qd.fem import FEModel, MaterialModel
from finray_qd.solver import frozen_preconditioner, implicit_euler_step

# --- mesh a finger cross-section -------------------------------------------
finger = benchmark_design().fingers[0]
mesh = triangulate(finger_outline(finger), h_min=1.0, h_max=3.0)
report = mesh.quality_report()
print("finger mesh:", report["n_triangles"], "triangles,",
      f"min angle {report['min_angle_deg']:.1f} deg,",
      f"edges [{report['min_edge']:.2f}, {report['max_edge']:.2f}] mm")

# --- cantilever validation ---------------------------------------------------
# A 100 x 4 mm strip, 20 mm deep, tip-loaded with 0.01 N, settles onto the
# Euler-Bernoulli deflection delta = F L^3 / (3 E' I) with E' = E/(1-nu^2).
material = MaterialModel(E=11.6, nu=0.49, rho=1150.0, thickness=20.0)
F_TIP, LENGTH, DEPTH = 0.01, 100.0, 4.0
E_eff = material.E / (1 - material.nu ** 2)
inertia = material.thickness * DEPTH ** 3 / 12
delta_ref = F_TIP * LENGTH ** 3 / (3 * E_eff * inertia)
print(f"\nanalytic tip deflection: {delta_ref:.4f} mm")

for cell in (2.0, 1.0, 0.5):
    beam = mesh_rectangle(LENGTH, DEPTH, cell)
    model = FEModel(beam, material)
    tip_nodes = np.where(np.abs(beam.vertices[:, 0] - LENGTH) < 1e-9)[0]
    f_ext = np.zeros((model.n_nodes, 2))
    f_ext[tip_nodes, 1] = F_TIP / len(tip_nodes)
    _f0, k0 = model.internal_forces(beam.vertices)
    precond = frozen_preconditioner(model.mass_dofs, k0, 0.02, 1.0, 0.01,
                                    prescribed_nodes=beam.mount_nodes)
    pos = beam.vertices.copy()
    vel = np.zeros_like(pos)
    warm = None
    for step in range(400):
        f_int, stiffness = model.internal_forces(pos)
        v = vel.ravel()
        damping = 1.0 * (model.mass_dofs * v) + 0.01 * (stiffness @ v)
        force = f_int + f_ext - damping.reshape(-1, 2)
        pos, vel, _, warm = implicit_euler_step(
            pos, vel, 0.02, mass_dofs=model.mass_dofs, force=force,
            stiffness=stiffness, rayleigh_alpha=1.0, rayleigh_beta=0.01,
            prescribed_nodes=beam.mount_nodes,
            prescribed_velocity=np.zeros((len(beam.mount_nodes), 2)),
            cg_maxiter=40000, warm_start=warm, preconditioner=precond)
        if step > 10 and model.kinetic_energy(vel) * 1e-3 < 1e-11:
            break
    tip = tip_nodes[np.argmin(np.abs(beam.vertices[tip_nodes, 1] - DEPTH / 2))]
    delta = pos[tip, 1] - beam.vertices[tip, 1]
    err = abs(delta - delta_ref) / delta_ref * 100
    print(f"  cell {cell:4.2f} mm: settled {delta:.4f} mm  ({err:5.2f}% off, {step + 1} steps)")
