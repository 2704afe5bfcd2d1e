import numpy as np
import pytest
import scipy.sparse as sp

from finray_qd.errors import StepNotConverged
from finray_qd.fem import FEModel, MaterialModel
from finray_qd.mesh import mesh_rectangle
from finray_qd.solver import cg_solve, frozen_preconditioner, implicit_euler_step

MAT = MaterialModel(E=11.6, nu=0.49, rho=1150.0, thickness=20.0)


def test_cg_identity_one_iteration(rng):
    b = rng.standard_normal(40)
    res = cg_solve(np.eye(40), b)
    assert res.converged
    assert res.iterations == 1
    assert np.allclose(res.x, b, atol=1e-12)


def test_cg_diagonal_converges_within_n(rng):
    n = 30
    A = np.diag(np.arange(1.0, n + 1))
    b = rng.standard_normal(n)
    res = cg_solve(A, b, tol=1e-6, maxiter=n)
    assert res.converged
    assert res.iterations <= n


def test_cg_matches_dense_direct_oracle(rng):
    for _ in range(50):
        B = rng.standard_normal((50, 50))
        A = B.T @ B + np.eye(50)
        b = rng.standard_normal(50)
        res = cg_solve(A, b, tol=1e-8, maxiter=1000)
        oracle = np.linalg.solve(A, b)
        assert res.converged
        assert np.linalg.norm(res.x - oracle) <= 1e-5 * np.linalg.norm(oracle)


def test_cg_best_so_far_history_non_increasing(rng):
    B = rng.standard_normal((80, 80))
    A = B.T @ B + 1e-3 * np.eye(80)
    b = rng.standard_normal(80)
    res = cg_solve(A, b, tol=1e-10, maxiter=500)
    hist = res.residual_history
    assert all(b2 <= a2 + 1e-15 for a2, b2 in zip(hist, hist[1:]))


def test_cg_cap_returns_best_iterate_flagged(rng):
    B = rng.standard_normal((60, 60))
    A = B.T @ B + 1e-6 * np.eye(60)
    b = rng.standard_normal(60)
    res = cg_solve(A, b, tol=1e-14, maxiter=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.residual >= 0


def test_cg_sparse_and_callable_operators(rng):
    n = 30
    dense = np.diag(np.linspace(1.0, 3.0, n))
    b = rng.standard_normal(n)
    x1 = cg_solve(sp.csr_matrix(dense), b).x
    x2 = cg_solve(lambda v: dense @ v, b).x
    assert np.allclose(x1, x2, atol=1e-9)


def test_cg_jacobi_preconditioner(rng):
    A = np.diag(np.logspace(0, 4, 40))
    b = rng.standard_normal(40)
    res = cg_solve(A, b, preconditioner="jacobi")
    assert res.converged
    assert res.iterations <= 3        # diagonal system solves immediately


def test_cg_rejects_indefinite():
    A = np.diag([1.0, -1.0])
    with pytest.raises(np.linalg.LinAlgError):
        cg_solve(A, np.array([1.0, 1.0]))


def test_zero_force_zero_velocity_is_fixed_point():
    mesh = mesh_rectangle(10.0, 4.0, 2.0)
    model = FEModel(mesh, MAT)
    pos, vel = mesh.vertices.copy(), np.zeros_like(mesh.vertices)
    f, K = model.internal_forces(pos)
    new_pos, new_vel, info, _ = implicit_euler_step(
        pos, vel, 0.005, mass_dofs=model.mass_dofs, force=f, stiffness=K,
        rayleigh_alpha=1.0, rayleigh_beta=0.01)
    assert np.allclose(new_pos, pos, atol=1e-12)
    assert np.allclose(new_vel, 0.0, atol=1e-12)


def test_free_fall_exact_without_stiffness():
    # point cloud with no elasticity: velocity accumulates exactly n*dt*g
    n = 12
    mass = np.full(2 * n, 3e-8)
    pos = np.random.default_rng(0).random((n, 2))
    vel = np.zeros((n, 2))
    g = np.array([0.0, -9810.0])
    dt = 0.005
    force = (mass.reshape(-1, 2) * g)
    for step in range(1, 21):
        pos, vel, _, _ = implicit_euler_step(
            pos, vel, dt, mass_dofs=mass, force=force, stiffness=None)
        assert np.allclose(vel[:, 1], step * dt * g[1], rtol=1e-12, atol=1e-12)


def test_free_fall_meshed_body_matches_closed_form():
    mesh = mesh_rectangle(10.0, 4.0, 2.0)
    model = FEModel(mesh, MAT)
    g = np.array([0.0, -9810.0])
    pos, vel = mesh.vertices.copy(), np.zeros_like(mesh.vertices)
    dt = 0.005
    for step in range(1, 11):
        f, K = model.internal_forces(pos)
        force = f + model.gravity_forces(g)
        pos, vel, _, _ = implicit_euler_step(
            pos, vel, dt, mass_dofs=model.mass_dofs, force=force, stiffness=K,
            rayleigh_alpha=0.0, rayleigh_beta=0.01, cg_tol=1e-13, cg_maxiter=20000)
    expected = 10 * dt * g[1]
    assert np.allclose(vel[:, 1], expected, rtol=1e-7)
    assert np.abs(vel[:, 0]).max() < 1e-7 * abs(expected)


def test_step_not_converged_raises():
    mesh = mesh_rectangle(40.0, 2.0, 1.0)       # slender: ill-conditioned
    model = FEModel(mesh, MAT)
    pos = mesh.vertices.copy()
    vel = np.zeros_like(pos)
    f, K = model.internal_forces(pos)
    f = f + np.full_like(f, 1e-3)
    with pytest.raises(StepNotConverged):
        implicit_euler_step(pos, vel, 0.005, mass_dofs=model.mass_dofs,
                            force=f, stiffness=K, cg_maxiter=2,
                            preconditioner=None)


def test_prescribed_nodes_follow_exactly():
    mesh = mesh_rectangle(10.0, 4.0, 2.0)
    model = FEModel(mesh, MAT)
    pos, vel = mesh.vertices.copy(), np.zeros_like(mesh.vertices)
    f, K = model.internal_forces(pos)
    pvel = np.tile([-2.0, 0.0], (len(mesh.mount_nodes), 1))
    new_pos, new_vel, _, _ = implicit_euler_step(
        pos, vel, 0.01, mass_dofs=model.mass_dofs, force=f, stiffness=K,
        rayleigh_alpha=1.0, rayleigh_beta=0.01,
        prescribed_nodes=mesh.mount_nodes, prescribed_velocity=pvel)
    assert np.allclose(new_vel[mesh.mount_nodes], pvel, atol=1e-14)
    assert np.allclose(new_pos[mesh.mount_nodes],
                       pos[mesh.mount_nodes] + 0.01 * pvel, atol=1e-14)


def test_frozen_preconditioner_speeds_up_convergence():
    mesh = mesh_rectangle(100.0, 4.0, 1.0)
    model = FEModel(mesh, MAT)
    f, K = model.internal_forces(mesh.vertices)
    pre = frozen_preconditioner(model.mass_dofs, K, 0.01, 1.0, 0.01,
                                prescribed_nodes=mesh.mount_nodes)
    fext = np.zeros_like(mesh.vertices)
    fext[:, 1] = 1e-5
    pos, vel = mesh.vertices.copy(), np.zeros_like(mesh.vertices)
    _, _, info, _ = implicit_euler_step(
        pos, vel, 0.01, mass_dofs=model.mass_dofs, force=f + fext, stiffness=K,
        rayleigh_alpha=1.0, rayleigh_beta=0.01,
        prescribed_nodes=mesh.mount_nodes,
        prescribed_velocity=np.zeros((len(mesh.mount_nodes), 2)),
        preconditioner=pre, cg_maxiter=50)
    assert info.cg_iterations <= 5
