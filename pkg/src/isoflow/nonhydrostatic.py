"""Non-hydrostatic isopycnal system with a pressure solve per stage.

.. math::

    \\partial_t h + \\nabla\\cdot((\\bar h + h)(\\bar u + u)) = \\kappa\\Delta h,

    \\partial_t u + (V\\cdot\\nabla) u + \\frac{1}{\\rho}\\nabla P
        + \\Big(1 + \\frac{\\partial_\\rho P - \\rho h}{\\rho(\\bar h + h)}\\Big)\\nabla H = 0,

    \\partial_t w + V\\cdot\\nabla w
        = \\frac{\\partial_\\rho P - \\rho h}{\\mu\\rho(\\bar h + h)},

with ``V = ubar + u + u*``. The vertical velocity is prognostic and is never
projected back onto the incompressibility constraint.
"""
import numpy as np

from .bolus import compute_ustar
from .errors import CFLError
from .hydrostatic import advect, advective_cfl, mass_flux_divergence
from .pressure import pressure_gradient_force, solve_pressure
from .state import NonHydroState, incompressibility_field, require_stratification
from .timestepping import if_rk4_step, run_loop

__all__ = [
    "rhs_nonhydro",
    "step_nonhydro",
    "run_nonhydro",
    "constraint_residual",
    "wave_speed",
]


def rhs_nonhydro(grid, state, profile, params, cache=None):
    """Explicit tendencies ``(dh, du, dw)`` of the non-hydrostatic system.

    Parameters
    ----------
    cache : dict, optional
        Holds the last non-hydrostatic pressure under ``"P_nh"`` (warm start)
        and receives the latest :class:`isoflow.pressure.PressureSolution`
        under ``"solution"``.
    """
    if not params.mu > 0:
        raise ValueError("the non-hydrostatic system requires mu > 0")
    require_stratification(grid, state.h, profile, params)
    guess = None if cache is None else cache.get("P_nh")
    sol = solve_pressure(grid, state, profile, params, guess=guess)
    if cache is not None:
        cache["P_nh"] = sol.P_nh
        cache["solution"] = sol
    h, u, w = state.h, state.u, state.w
    velocity = profile.ubar_b(grid) + u + compute_ustar(grid, h, profile, params)
    horiz, vert = pressure_gradient_force(grid, sol, state, profile, params)
    dh = -mass_flux_divergence(grid, h, u, profile)
    du = -advect(grid, velocity, u) - horiz
    dw = -advect(grid, velocity, w) + vert
    return dh, du, dw


def wave_speed(grid, state, profile, params):
    """Internal-wave speed estimate ``sqrt(rho1 max(hbar + h) / rho0)``."""
    total = profile.hbar_b(grid) + state.h
    return float(np.sqrt(params.rho1 * total.max() / params.rho0))


def step_nonhydro(grid, state, profile, params, dt, cache=None):
    """One integrating-factor RK4 step; diffusion acts on ``h`` only.

    Raises
    ------
    CFLError
        If the advective or internal-wave CFL number exceeds the limit.
    SolverError
        If a pressure solve does not converge.
    StratificationError
        If the new state violates the thickness floor.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    number = max(
        advective_cfl(grid, state, profile, dt),
        dt * wave_speed(grid, state, profile, params) * grid.k_max,
    )
    if number > params.cfl_limit:
        raise CFLError(f"CFL number {number:.3g} exceeds {params.cfl_limit:g}", number)
    cache = {} if cache is None else cache

    def tendency(y):
        return rhs_nonhydro(grid, NonHydroState(state.t, *y), profile, params, cache)

    def propagate(y, tau):
        return (grid.heat_propagate(y[0], params.kappa, tau), y[1], y[2])

    new = state.evolve(state.t + dt, if_rk4_step(state.arrays(), dt, tendency, propagate))
    require_stratification(grid, new.h, profile, params)
    return new


def run_nonhydro(grid, state, profile, params, dt, steps, stride=1, observe=None, sink=None):
    """Integrate the non-hydrostatic system; see :func:`isoflow.hydrostatic.run_hydro`."""
    cache = {}
    return run_loop(
        state, steps, stride,
        lambda s: step_nonhydro(grid, s, profile, params, dt, cache),
        observe, sink,
    )


def constraint_residual(grid, state, profile):
    """Norms of the incompressibility residual and of ``w`` at the bottom density.

    Returns
    -------
    div_residual : float
        Discrete L2 norm over the domain.
    bottom_w : float
        L2 norm over the horizontal torus of ``w(., rho1)``.
    """
    res = incompressibility_field(grid, state.h, state.u, state.w, profile)
    wb = state.w[..., -1]
    return grid.l2_norm(res), float(np.sqrt(np.sum(wb * wb) * grid.cell_area))
