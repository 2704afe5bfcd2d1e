"""Conjugate-gradient solver and the implicit Euler velocity update.

The time stepper solves, for the velocity increment dv,

    (M + dt (a M + b K) + dt^2 K) dv = dt (f(x, v) - dt K v)

where K is the (positive semi-definite) tangent stiffness, a and b the
Rayleigh damping coefficients and f the total force at the current state
including the Rayleigh damping force -(a M + b K) v. Prescribed nodes get
their scripted velocity exactly and are condensed out of the linear system.
Contact contributes extra stiffness and damping blocks so stiff penalty
forces are handled implicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import StepNotConverged


@dataclass
class CGResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float                    # final relative residual
    residual_history: list = field(default_factory=list)  # best-so-far per iteration


def cg_solve(A, b, tol: float = 1e-6, maxiter: int = 1000,
             preconditioner=None, x0=None) -> CGResult:
    """Conjugate gradients for a symmetric positive definite operator.

    ``A`` may be a dense array, a sparse matrix or a callable implementing
    the matrix-vector product. Iterates until the relative residual
    ||A x - b|| / ||b|| drops below ``tol`` or the iteration cap is hit, in
    which case the best iterate seen (smallest residual) is returned with
    ``converged=False``. The logged history is the best-so-far residual, so
    it is non-increasing by construction.

    ``preconditioner`` may be None, the string ``"jacobi"``, or a callable
    applying an SPD approximate inverse to a residual vector.
    """
    b = np.asarray(b, dtype=float)
    if callable(A):
        matvec = A
        diag = None
    elif sp.issparse(A):
        matvec = A.dot
        diag = A.diagonal()
    else:
        A = np.asarray(A, dtype=float)
        matvec = A.dot
        diag = np.diagonal(A)
    if preconditioner is None:
        precond = lambda r: r
    elif preconditioner == "jacobi":
        if diag is None:
            raise ValueError("jacobi preconditioning needs an explicit matrix")
        inv_diag = 1.0 / diag
        precond = lambda r: inv_diag * r
    else:
        precond = preconditioner

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), True, 0, 0.0, [0.0])

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    rnorm = float(np.linalg.norm(r))
    best_x, best_r = x.copy(), rnorm
    history = []
    if rnorm / bnorm <= tol:
        return CGResult(x, True, 0, rnorm / bnorm, [rnorm / bnorm])
    for it in range(1, maxiter + 1):
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise np.linalg.LinAlgError("operator is not positive definite")
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if rnorm < best_r:
            best_r = rnorm
            best_x = x.copy()
        history.append(best_r / bnorm)
        if rnorm <= tol * bnorm:
            return CGResult(x, True, it, rnorm / bnorm, history)
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(best_x, False, maxiter, best_r / bnorm, history)


@dataclass
class StepInfo:
    cg_iterations: int
    cg_residual: float


def frozen_preconditioner(mass_dofs, stiffness, dt, rayleigh_alpha,
                          rayleigh_beta, prescribed_nodes=None):
    """SPD preconditioner from a factorization of the rest-state system.

    Factorizes A0 = M + dt (a M + b K0) + dt^2 K0 reduced to the free dofs
    once; applying it inside CG absorbs the ill conditioning of slender
    meshes while the per-step matrix (rotations, contact blocks) is still
    solved iteratively.
    """
    from scipy.sparse.linalg import splu

    ndof = len(mass_dofs)
    M = sp.diags(mass_dofs)
    K = stiffness
    A0 = (M + dt * (rayleigh_alpha * M + rayleigh_beta * K) + dt * dt * K).tocsc()
    free = np.ones(ndof, dtype=bool)
    if prescribed_nodes is not None and len(prescribed_nodes):
        pn = np.asarray(prescribed_nodes)
        free[2 * pn] = False
        free[2 * pn + 1] = False
    lu = splu(A0[free][:, free].tocsc())
    return lu.solve


def implicit_euler_step(positions, velocities, dt, *, mass_dofs,
                        force, stiffness, extra_damping=None,
                        rayleigh_alpha: float = 0.0, rayleigh_beta: float = 0.0,
                        prescribed_nodes=None, prescribed_velocity=None,
                        cg_tol: float = 1e-6, cg_maxiter: int = 1000,
                        warm_start=None, preconditioner="jacobi"):
    """One backward-Euler step; returns (positions', velocities', StepInfo).

    ``force`` is the total nodal force (n, 2) at the current state, already
    including any velocity-dependent terms; ``stiffness`` the tangent CSR
    matrix (2n x 2n); ``extra_damping`` an optional CSR damping matrix from
    contact friction. ``prescribed_nodes`` move with ``prescribed_velocity``
    ((k, 2), the velocity over the upcoming step) and are condensed out.

    Raises :class:`StepNotConverged` when CG hits its cap.
    """
    n = len(positions)
    ndof = 2 * n
    v = np.asarray(velocities, dtype=float).ravel()
    f = np.asarray(force, dtype=float).ravel()
    K = stiffness
    if K is None:
        K = sp.csr_matrix((ndof, ndof))
    M = sp.diags(mass_dofs)

    # A = M + dt (a M + b K + C_extra) + dt^2 K, fused into two scaled sums
    A = ((1.0 + dt * rayleigh_alpha) * M
         + (dt * rayleigh_beta + dt * dt) * K).tocsr()
    if extra_damping is not None:
        A = A + dt * extra_damping
    rhs = dt * (f - dt * (K @ v))

    dv = np.zeros(ndof)
    free = np.ones(ndof, dtype=bool)
    if prescribed_nodes is not None and len(prescribed_nodes):
        pn = np.asarray(prescribed_nodes)
        pdofs = np.empty(2 * len(pn), dtype=np.int64)
        pdofs[0::2] = 2 * pn
        pdofs[1::2] = 2 * pn + 1
        free[pdofs] = False
        pvel = np.asarray(prescribed_velocity, dtype=float).ravel()
        dv[pdofs] = pvel - v[pdofs]
        rhs = rhs - A @ dv          # dv is zero on free dofs here
    rhs_free = rhs[free]
    A_ff = A[free][:, free]

    x0 = warm_start[free] if warm_start is not None and len(warm_start) == ndof else None
    result = cg_solve(A_ff, rhs_free, tol=cg_tol, maxiter=cg_maxiter,
                      preconditioner=preconditioner, x0=x0)
    if not result.converged:
        raise StepNotConverged(result.residual)
    dv[free] = result.x

    v_new = v + dv
    x_new = np.asarray(positions, dtype=float).ravel() + dt * v_new
    info = StepInfo(cg_iterations=result.iterations, cg_residual=result.residual)
    return x_new.reshape(n, 2), v_new.reshape(n, 2), info, dv
