"""Hydrostatic isopycnal system with thickness diffusion.

.. math::

    \\partial_t h + \\nabla\\cdot((\\bar h + h)(\\bar u + u)) = \\kappa\\Delta h,

    \\partial_t u + ((\\bar u + u + u_\\star)\\cdot\\nabla) u
        + \\frac{1}{\\rho}\\nabla\\psi = \\nu\\Delta u.

The diffusion terms are integrated exactly by the heat propagator; only the
explicit remainder is returned by :func:`rhs_hydro`.
"""
from typing import NamedTuple

import numpy as np

from .bolus import compute_ustar
from .errors import CFLError
from .montgomery import grad_psi
from .state import HydroState, require_stratification
from .timestepping import if_rk4_step, run_loop

__all__ = [
    "HydroTendency",
    "advect",
    "rhs_hydro",
    "rhs_hydro_linearized",
    "zero_tendency",
    "step_hydro",
    "run_hydro",
]


class HydroTendency(NamedTuple):
    dh: np.ndarray
    du: np.ndarray


def advect(grid, velocity, f):
    """``(velocity . grad) f`` with dealiased products; ``f`` scalar or vector."""
    g = grid.grad(f)
    out = grid.product(velocity[0], g[0])
    for j in range(1, grid.d):
        out = out + grid.product(velocity[j], g[j])
    return out


def mass_flux_divergence(grid, h, u, profile):
    total = profile.hbar_b(grid) + h
    return grid.div(grid.product(total, profile.ubar_b(grid) + u))


def rhs_hydro(grid, state, profile, params):
    """Explicit tendencies of the hydrostatic system.

    Returns
    -------
    HydroTendency
        ``dh = -div((hbar + h)(ubar + u))`` and
        ``du = -((ubar + u + u*) . grad) u - grad(psi) / rho``.
    """
    require_stratification(grid, state.h, profile, params)
    h, u = state.h, state.u
    dh = -mass_flux_divergence(grid, h, u, profile)
    velocity = profile.ubar_b(grid) + u + compute_ustar(grid, h, profile, params)
    du = -advect(grid, velocity, u) - grad_psi(grid, h) / grid.rho_b
    return HydroTendency(dh, du)


def rhs_hydro_linearized(grid, state, profile, params):
    """Linearization about the rest state ``h = 0``, ``u = 0``, ``ubar = 0``.

    ``dh = -hbar div u`` and ``du = -grad(psi(h)) / rho``; skew-adjoint with
    respect to :func:`isoflow.diagnostics.energy_hydro`.
    """
    if not profile.at_rest:
        raise ValueError("linearized tendencies require a background at rest")
    dh = -profile.hbar_b(grid) * grid.div(state.u)
    du = -grad_psi(grid, state.h) / grid.rho_b
    return HydroTendency(dh, du)


def zero_tendency(grid, state, profile, params):
    """No explicit forcing: only the diffusion propagator acts."""
    return HydroTendency(np.zeros_like(state.h), np.zeros_like(state.u))


def advective_cfl(grid, state, profile, dt):
    speed = np.sqrt(np.sum((profile.ubar_b(grid) + state.u) ** 2, axis=0)).max()
    return dt * speed * grid.k_max


def step_hydro(grid, state, profile, params, dt, rhs=rhs_hydro):
    """One integrating-factor RK4 step of the hydrostatic system.

    Raises
    ------
    CFLError
        If ``dt max|ubar + u| k_max`` exceeds ``params.cfl_limit``.
    StratificationError
        If the new state violates the thickness floor.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    number = advective_cfl(grid, state, profile, dt)
    if number > params.cfl_limit:
        raise CFLError(f"advective CFL number {number:.3g} exceeds {params.cfl_limit:g}", number)

    def tendency(y):
        return tuple(rhs(grid, HydroState(state.t, *y), profile, params))

    def propagate(y, tau):
        return (
            grid.heat_propagate(y[0], params.kappa, tau),
            grid.heat_propagate(y[1], params.nu, tau),
        )

    new = state.evolve(state.t + dt, if_rk4_step(state.arrays(), dt, tendency, propagate))
    require_stratification(grid, new.h, profile, params)
    return new


def run_hydro(grid, state, profile, params, dt, steps, stride=1, observe=None, sink=None,
              rhs=rhs_hydro):
    """Integrate ``steps`` steps, recording every ``stride`` steps.

    ``observe(state, step)`` builds a diagnostics record and ``sink(record)``
    receives it as soon as it exists. Returns a
    :class:`isoflow.timestepping.Trajectory`.
    """
    return run_loop(
        state, steps, stride,
        lambda s: step_hydro(grid, s, profile, params, dt, rhs=rhs),
        observe, sink,
    )
