"""Non-hydrostatic pressure boundary-value problem.

The total pressure :math:`P + \\bar P_{eq}` solves

.. math:: \\nabla^\\mu\\cdot(A^\\mu\\nabla^\\mu(P + \\bar P_{eq})) = \\mu\\,\\mathrm{RHS},
          \\qquad \\nabla^\\mu = (\\sqrt\\mu\\nabla_x, \\partial_\\rho),

with a Dirichlet condition at the surface density and a Neumann condition at
the bottom density.

Discretization
--------------
Unknowns live on the density nodes ``1..nrho`` (node 0 carries the Dirichlet
value). The bilinear form is assembled in flux form on the density cells
``j + 1/2``: on each cell the gradient is

* ``G_rho = (P[j+1] - P[j]) / drho``
* ``G_x = sqrt(mu) * (grad P[j] + grad P[j+1]) / 2``

and the coefficients are evaluated from cell averages of ``hbar + h`` and
``grad H`` at the cell midpoint density. The nodal operator ``K`` is minus
the gradient of the discrete energy ``sum drho * G . A G`` so it is
symmetric and negative definite; ``W^{-1} K`` (``W`` the trapezoid weights)
approximates the elliptic operator. The Neumann flux enters as a boundary
source at the last node.

With this construction the rest state and every horizontally uniform state
are reproduced exactly: the flux of ``hbar + hydrostatic_pressure`` through
each cell is exactly one.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .bolus import compute_ustar, compute_wstar
from .errors import SolverError
from .hydrostatic import advect, mass_flux_divergence
from .montgomery import grad_psi, hydrostatic_pressure
from .state import compute_H, require_stratification

__all__ = [
    "CoefficientField",
    "PressureSolution",
    "assemble_Amu",
    "apply_operator",
    "flux_source",
    "assemble_rhs",
    "assemble_rhs_direct",
    "solve_generic",
    "solve_pressure",
    "pressure_gradient_force",
]


def _mid(f):
    return 0.5 * (f[..., :-1] + f[..., 1:])


@dataclass(frozen=True)
class CoefficientField:
    """Coefficient matrix ``A^mu`` at the nodes and on the density cells.

    The matrix is ``[[a_hh Id, a_hr], [a_hr^T, a_rr]]`` with
    ``a_hh = (hbar + h) / rho``, ``a_hr = sqrt(mu) grad H / rho`` and
    ``a_rr = (1 + mu |grad H|^2) / (rho (hbar + h))``.

    Attributes
    ----------
    a_hh, a_rr : ndarray
        Scalar blocks at the nodes, shape ``grid.shape``.
    a_hr : ndarray
        Off-diagonal block at the nodes, shape ``(d,) + grid.shape``.
    cell_hh, cell_hr, cell_rr : ndarray
        The same blocks on the ``nrho`` density cells.
    mu : float
    """

    a_hh: np.ndarray
    a_hr: np.ndarray
    a_rr: np.ndarray
    cell_hh: np.ndarray
    cell_hr: np.ndarray
    cell_rr: np.ndarray
    mu: float

    def matrix(self):
        """Nodal matrices, shape ``grid.shape + (d + 1, d + 1)``."""
        d = self.a_hr.shape[0]
        A = np.zeros(self.a_hh.shape + (d + 1, d + 1))
        for i in range(d):
            A[..., i, i] = self.a_hh
            A[..., i, d] = A[..., d, i] = self.a_hr[i]
        A[..., d, d] = self.a_rr
        return A

    def min_eigenvalue(self):
        """Smallest eigenvalue of the nodal matrices."""
        return float(np.linalg.eigvalsh(self.matrix()).min())


def _coefficients(rho, total, gH, mu):
    g2 = np.sum(gH * gH, axis=0)
    return total / rho, np.sqrt(mu) * gH / rho, (1.0 + mu * g2) / (rho * total)


def assemble_Amu(grid, h, H, profile, params):
    """Build :class:`CoefficientField` for thickness ``h`` and height ``H``."""
    require_stratification(grid, h, profile, params)
    total = profile.hbar_b(grid) + h
    gH = grid.grad(H)
    rho_mid = _mid(grid.rho)
    nodal = _coefficients(grid.rho_b, total, gH, params.mu)
    cell = _coefficients(rho_mid.reshape(grid.rho_b.shape[:-1] + (-1,)), _mid(total), _mid(gH), params.mu)
    return CoefficientField(*nodal, *cell, params.mu)


def _assemble(grid, Fx, Fr, mu):
    # nodal divergence of a cell-centred flux (Fx, Fr); zero flux beyond the ends
    pad = [(0, 0)] * (Fr.ndim - 1) + [(1, 1)]
    out = np.diff(np.pad(Fr, pad), axis=-1)
    S = 0.5 * grid.drho * np.pad(Fx, [(0, 0)] + pad)
    return out + np.sqrt(mu) * grid.div(S[..., 1:] + S[..., :-1])


def apply_operator(grid, A, P):
    """Nodal operator ``K P`` on all nodes ``0..nrho`` (``P`` full-length).

    ``K`` approximates ``W * div^mu(A grad^mu P)`` with natural (zero-flux)
    boundary terms at both ends.
    """
    mu = A.mu
    Gr = np.diff(P, axis=-1) / grid.drho
    Gx = np.sqrt(mu) * _mid(grid.grad(P))
    Fx = A.cell_hh * Gx + A.cell_hr * Gr
    Fr = np.sum(A.cell_hr * Gx, axis=0) + A.cell_rr * Gr
    return _assemble(grid, Fx, Fr, mu)


def flux_source(grid, R, mu):
    """Nodal weak form of ``div^mu R`` for a nodal ``(d + 1)``-vector field ``R``.

    ``R[:d]`` are the horizontal and ``R[d]`` the density component. The
    bottom component acts as the Neumann flux.
    """
    R = np.asarray(R, dtype=float)
    d = grid.d
    return _assemble(grid, _mid(R[:d]), _mid(R[d]), mu)


def _rhs_groups(grid, h, u, w, profile, params, direct=False):
    total = profile.hbar_b(grid) + h
    H = compute_H(grid, h)
    gH = grid.grad(H)
    us = compute_ustar(grid, h, profile, params)
    ws = compute_wstar(grid, h, profile, params)
    velocity = profile.ubar_b(grid) + u + us
    shear = profile.ubar_prime_b(grid) + grid.ddrho(u)
    adv_u = advect(grid, velocity, u)
    flux_div = grid.div(grid.product(total, velocity))
    if direct:
        lifted = grid.integrate_rho_upper(flux_div)
    else:
        lifted = np.sum(grid.product(velocity, gH), axis=0) - w - ws
    dadv = grid.ddrho(adv_u)
    glift = grid.grad(lifted)
    out = -grid.product(total, grid.div(adv_u))
    for i in range(grid.d):
        out = out - grid.product(gH[i], dadv[i]) - grid.product(glift[i], shear[i])
    out = out + grid.ddrho(advect(grid, velocity, w))
    out = out - grid.product(flux_div, grid.div(u))
    return out


def assemble_rhs(grid, state, profile, params):
    """Right side of the pressure problem with the lifted transport rewritten.

    Uses ``int_rho^rho1 div((hbar + h) V) = V . grad H - w - w*`` with
    ``V = ubar + u + u*``.
    """
    require_stratification(grid, state.h, profile, params)
    return _rhs_groups(grid, state.h, state.u, state.w, profile, params)


def assemble_rhs_direct(grid, state, profile, params):
    """As :func:`assemble_rhs` but integrating the transport divergence directly."""
    require_stratification(grid, state.h, profile, params)
    return _rhs_groups(grid, state.h, state.u, state.w, profile, params, direct=True)


# --------------------------------------------------------------------- solver
class _Preconditioner:
    """Exact inverse of the operator with horizontally averaged coefficients.

    Dropping ``a_hr`` and averaging ``a_hh``, ``a_rr`` over x decouples the
    horizontal Fourier modes; each mode is a tridiagonal system in density.
    All modes are factorized together as one block-diagonal sparse matrix.
    """

    def __init__(self, grid, A):
        self.grid = grid
        n, dr = grid.nrho, grid.drho
        ahh = grid.hmean(A.cell_hh)
        arr = grid.hmean(A.cell_rr)
        k2 = sum(kk**2 for kk in grid.k_deriv).reshape(-1, 1)
        m = 0.25 * A.mu * dr * k2
        # minus the averaged operator on unknowns 1..n; cell c joins nodes c, c+1
        up_arr, up_ahh = np.append(arr[1:], 0.0), np.append(ahh[1:], 0.0)
        diag = (arr + up_arr) / dr + m * (ahh + up_ahh)
        off = -up_arr / dr + m * up_ahh
        off[:, -1] = 0.0
        off = off.ravel()[:-1]
        self.lu = splu(sp.diags([off, diag.ravel(), off], [-1, 0, 1], format="csc"))

    def __call__(self, r):
        g = self.grid
        R = np.fft.rfftn(r, axes=g.haxes)
        shape = R.shape
        flat = R.reshape(-1)
        sol = self.lu.solve(np.stack([flat.real, flat.imag], axis=1))
        Z = (sol[:, 0] + 1j * sol[:, 1]).reshape(shape)
        return np.fft.irfftn(Z, s=g.counts, axes=g.haxes)


def _full(x):
    pad = [(0, 0)] * (x.ndim - 1) + [(1, 0)]
    return np.pad(x, pad)


def solve_generic(grid, A, Q0=None, Q1=None, R=None, params=None, x0=None, boundary=None):
    """Solve ``div^mu(A grad^mu P) = Q0 + sqrt(mu) Lambda Q1 + div^mu R``.

    Boundary conditions are ``P = 0`` at the surface density and
    ``e_rho . (A grad^mu P - R) = 0`` at the bottom density.

    Parameters
    ----------
    grid : Grid
    A : CoefficientField
    Q0, Q1 : ndarray, optional
        Nodal scalar sources.
    R : ndarray, optional
        Nodal ``(d + 1)``-vector source.
    params : Params
        Supplies ``solver_tol`` and ``max_iters``.
    x0 : ndarray, optional
        Initial guess (full nodal field).
    boundary : ndarray, optional
        Extra nodal source added to the weak right side (used for
        inhomogeneous Neumann data).

    Returns
    -------
    P : ndarray
        Solution on all nodes, exactly zero at the surface density.
    info : dict
        ``iterations``, ``residual`` (relative, preconditioned energy norm)
        and ``history``.

    Raises
    ------
    SolverError
        When the residual does not drop below ``params.solver_tol`` within
        ``params.max_iters`` iterations.
    """
    w = grid.weights
    mu = A.mu
    b = np.zeros(grid.shape)
    if Q0 is not None:
        b = b + w * Q0
    if Q1 is not None:
        b = b + w * np.sqrt(mu) * grid.lambda_s(Q1, 1)
    if R is not None:
        b = b + flux_source(grid, R, mu)
    if boundary is not None:
        b = b + boundary
    return _pcg(grid, A, b, params, x0)


def _pcg(grid, A, b_full, params, x0):
    # conjugate gradients on -K restricted to nodes 1..nrho
    tol = params.solver_tol
    max_iters = params.max_iters or 10 * grid.size
    rhs = -b_full[..., 1:]

    def op(x):
        return -apply_operator(grid, A, _full(x))[..., 1:]

    precond = _Preconditioner(grid, A)
    z_b = precond(rhs)
    bnorm = np.sqrt(max(np.vdot(rhs, z_b), 0.0))
    if bnorm == 0.0:
        return np.zeros(grid.shape), {"iterations": 0, "residual": 0.0, "history": []}
    x = np.zeros_like(rhs) if x0 is None else np.array(x0[..., 1:], dtype=float)
    r = rhs - op(x) if x0 is not None else rhs.copy()
    z = precond(r) if x0 is not None else z_b
    rz = np.vdot(r, z)
    history = [float(np.sqrt(max(rz, 0.0)) / bnorm)]
    p = z.copy()
    it = 0
    while history[-1] > tol:
        if it >= max_iters:
            raise SolverError(
                f"pressure solver stalled at relative residual {history[-1]:.3e} after {it} iterations",
                history,
            )
        Ap = op(p)
        alpha = rz / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        z = precond(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        history.append(float(np.sqrt(max(rz, 0.0)) / bnorm))
    return _full(x), {"iterations": it, "residual": history[-1], "history": history}


@dataclass
class PressureSolution:
    """Pressure deviation and its hydrostatic / non-hydrostatic parts.

    Attributes
    ----------
    P, P_h, P_nh : ndarray
        ``P = P_h + P_nh``; all vanish at the surface density.
    iterations : int
    residual : float
        Final relative residual of the linear solve.
    rhs : ndarray
        Assembled right side (before the factor ``mu``).
    """

    P: np.ndarray
    P_h: np.ndarray
    P_nh: np.ndarray
    iterations: int
    residual: float
    rhs: np.ndarray = field(repr=False, default=None)
    coefficients: CoefficientField = field(repr=False, default=None)

    def nh_norm(self, grid):
        return grid.l2_norm(self.P_nh)


def solve_pressure(grid, state, profile, params, guess=None):
    """Reconstruct the pressure of a non-hydrostatic state.

    The unknown actually solved for is ``P_nh``: the hydrostatic part and
    the equilibrium pressure are known in closed form, and their residual
    together with the Neumann datum forms the source. ``guess`` is an
    optional previous ``P_nh`` used as warm start.
    """
    if not params.mu > 0:
        raise ValueError("the pressure problem requires mu > 0")
    require_stratification(grid, state.h, profile, params)
    H = compute_H(grid, state.h)
    A = assemble_Amu(grid, state.h, H, profile, params)
    rhs = assemble_rhs(grid, state, profile, params)
    P_h = hydrostatic_pressure(grid, state.h)
    known = hydrostatic_pressure(grid, profile.hbar_b(grid) + state.h)
    neumann = np.zeros(grid.shape)
    neumann[..., -1] = 1.0
    boundary = -neumann - apply_operator(grid, A, known)
    P_nh, info = solve_generic(grid, A, Q0=params.mu * rhs, params=params, x0=guess, boundary=boundary)
    return PressureSolution(P_h + P_nh, P_h, P_nh, info["iterations"], info["residual"], rhs, A)


def balance_defect(grid, sol):
    """Discrete ``d_rho P - rho h``, carried entirely by ``P_nh``.

    The bottom value is the Neumann datum, zero.
    """
    out = grid.ddrho4(sol.P_nh)
    out[..., -1] = 0.0
    return out


def pressure_gradient_force(grid, sol, state, profile, params=None, vertical=True):
    """Pressure forces entering the momentum and vertical-velocity equations.

    Returns
    -------
    horizontal : ndarray
        ``grad P / rho + (1 + (d_rho P - rho h) / (rho (hbar + h))) grad H``.
    vertical : ndarray or None
        ``(d_rho P - rho h) / (mu rho (hbar + h))``.

    Raises
    ------
    ValueError
        If ``vertical`` is requested with ``mu == 0``.
    """
    mu = sol.coefficients.mu if params is None else params.mu
    if vertical and not mu > 0:
        raise ValueError("vertical pressure force is undefined for mu = 0")
    total = profile.hbar_b(grid) + state.h
    defect = balance_defect(grid, sol)
    gH = grid.grad(compute_H(grid, state.h))
    ratio = grid.dealias(defect / (grid.rho_b * total))
    horiz = (grad_psi(grid, state.h) + grid.grad(sol.P_nh)) / grid.rho_b + grid.product(ratio, gH)
    vert = ratio / mu if vertical else None
    return horiz, vert
