"""Montgomery potential gradient and the associated vertical operator.

The operator

.. math:: (M f)(\\rho) = \\rho_0 \\int_{\\rho_0}^{\\rho_1} f
          + \\int_{\\rho_0}^{\\rho}\\int_{\\rho'}^{\\rho_1} f

maps a thickness profile to the Montgomery potential, so that the
hydrostatic pressure force is :math:`\\nabla\\psi = M \\nabla h`.
"""
import numpy as np

__all__ = [
    "apply_M",
    "m_inner",
    "grad_psi",
    "grad_psi_direct",
    "hydrostatic_pressure",
]


def apply_M(grid, f):
    """Apply ``M`` along the trailing (density) axis of ``f``."""
    f = np.asarray(f, dtype=float)
    total = grid.integrate_rho(f)[..., None]
    return grid.rho0 * total + grid.integrate_rho_lower(grid.integrate_rho_upper(f))


def m_inner(grid, f, g):
    """Density inner product under which :func:`apply_M` is self-adjoint.

    Sums over every axis, so it also serves horizontally distributed profiles.
    """
    return float(np.sum(np.asarray(f) * np.asarray(g) * grid.m_weights))


def grad_psi(grid, h):
    """Horizontal gradient of the Montgomery potential, ``M`` applied to ``grad h``."""
    return apply_M(grid, grid.grad(h))


def grad_psi_direct(grid, h):
    """Equivalent form ``int_rho0^rho rho' grad h + rho int_rho^rho1 grad h``.

    Agrees with :func:`grad_psi` to second order in ``drho``; used as a
    cross-check.
    """
    gh = grid.grad(h)
    rho = grid.rho_b
    return grid.integrate_rho_lower(rho * gh) + rho * grid.integrate_rho_upper(gh)


def hydrostatic_pressure(grid, h):
    """Hydrostatic pressure ``int_rho0^rho rho' h`` of a thickness field.

    Uses the midpoint density and the cell average of ``h`` on every
    interval, which makes it algebraically identical to ``psi - rho H``
    built from :func:`apply_M` and discrete balance exact for horizontally
    uniform states. Exactly zero at the surface density. Also accepts a bare
    density profile such as ``hbar``.
    """
    h = np.asarray(h, dtype=float)
    rho_mid = 0.5 * (grid.rho[:-1] + grid.rho[1:])
    cell = 0.5 * grid.drho * rho_mid * (h[..., :-1] + h[..., 1:])
    out = np.zeros_like(h)
    np.cumsum(cell, axis=-1, out=out[..., 1:])
    return out
