"""Prognostic states, background profiles, parameters and validity guards."""
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StratificationError

__all__ = [
    "Params",
    "BackgroundProfile",
    "HydroState",
    "NonHydroState",
    "StratificationReport",
    "compute_H",
    "check_stratification",
    "require_stratification",
    "init_w",
    "incompressibility_field",
]


@dataclass(frozen=True)
class Params:
    """Dimensionless constants and numerical tolerances of one run.

    Parameters
    ----------
    mu : float
        Shallow-water parameter (squared aspect ratio).
    kappa : float
        Thickness diffusivity.
    nu : float
        Artificial horizontal viscosity of the regularized hydrostatic system.
    rho0, rho1 : float
        Surface and bottom densities.
    h_floor : float
        Minimum admissible total thickness.
    cfl_limit : float
        Stability bound on ``dt * speed * k_max``.
    solver_tol : float
        Relative residual tolerance of the pressure solver.
    max_iters : int or None
        Iteration cap of the pressure solver; ``None`` means ten times the
        number of unknowns.
    """

    mu: float = 0.0
    kappa: float = 0.0
    nu: float = 0.0
    rho0: float = 1.0
    rho1: float = 2.0
    h_floor: float = 0.1
    cfl_limit: float = 0.8
    solver_tol: float = 1e-10
    max_iters: int | None = None

    def __post_init__(self):
        if not 0 < self.rho0 < self.rho1:
            raise ValueError("densities must satisfy 0 < rho0 < rho1")
        for name in ("mu", "kappa", "nu"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.h_floor > 0:
            raise ValueError("h_floor must be positive")
        if not self.cfl_limit > 0 or not self.solver_tol > 0:
            raise ValueError("cfl_limit and solver_tol must be positive")
        if self.kappa > 1:
            warnings.warn("kappa > 1 lies outside the analysed regime", stacklevel=3)
        if self.mu > self.kappa:
            warnings.warn("mu > kappa lies outside the analysed regime", stacklevel=3)

    def with_(self, **changes):
        """Copy with some fields replaced (regime warnings suppressed)."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return replace(self, **changes)


@dataclass(frozen=True)
class BackgroundProfile:
    """Steady equilibrium ``(hbar(rho), ubar(rho))``.

    Attributes
    ----------
    hbar : ndarray, shape (nrho + 1,)
        Equilibrium thickness, strictly positive.
    ubar : ndarray, shape (d, nrho + 1)
        Equilibrium shear velocity.
    """

    hbar: np.ndarray
    ubar: np.ndarray

    def __post_init__(self):
        hbar = np.asarray(self.hbar, dtype=float)
        ubar = np.atleast_2d(np.asarray(self.ubar, dtype=float))
        if hbar.ndim != 1 or ubar.shape[1:] != hbar.shape:
            raise ValueError("hbar must be 1-D and ubar of shape (d, len(hbar))")
        if not np.all(np.isfinite(hbar)) or not np.all(np.isfinite(ubar)):
            raise ValueError("profile contains non-finite values")
        if hbar.min() <= 0:
            raise ValueError("hbar must be strictly positive")
        object.__setattr__(self, "hbar", hbar)
        object.__setattr__(self, "ubar", ubar)

    @classmethod
    def uniform(cls, grid, hbar=1.0, ubar=0.0, shear=0.0, hbar_slope=0.0):
        """Affine profiles ``hbar + slope (rho - rho0)`` and ``ubar + shear (rho - rho0)``.

        ``ubar`` and ``shear`` may be scalars (x-component only) or length-d
        sequences.
        """
        r = grid.rho - grid.rho0
        ub = np.zeros(grid.d) + np.asarray(ubar, dtype=float)
        sh = np.zeros(grid.d) + np.asarray(shear, dtype=float)
        if np.ndim(ubar) == 0:
            ub[1:] = 0.0
        if np.ndim(shear) == 0:
            sh[1:] = 0.0
        return cls(hbar + hbar_slope * r, ub[:, None] + sh[:, None] * r)

    @property
    def at_rest(self):
        return not np.any(self.ubar)

    def hbar_b(self, grid):
        """``hbar`` shaped to broadcast against a scalar field."""
        return self.hbar.reshape((1,) * grid.d + (-1,))

    def ubar_b(self, grid):
        return self.ubar.reshape((grid.d,) + (1,) * grid.d + (-1,))

    def ubar_prime_b(self, grid):
        return grid.ddrho(self.ubar_b(grid))


@dataclass(frozen=True)
class HydroState:
    """Thickness perturbation ``h`` and horizontal velocity ``u`` at time ``t``."""

    t: float
    h: np.ndarray
    u: np.ndarray

    fields = ("h", "u")

    def arrays(self):
        return (self.h, self.u)

    def evolve(self, t, arrays):
        return type(self)(t, *arrays)


@dataclass(frozen=True)
class NonHydroState:
    """As :class:`HydroState` plus the vertical velocity ``w``."""

    t: float
    h: np.ndarray
    u: np.ndarray
    w: np.ndarray

    fields = ("h", "u", "w")

    def arrays(self):
        return (self.h, self.u, self.w)

    def evolve(self, t, arrays):
        return type(self)(t, *arrays)

    def hydro(self):
        return HydroState(self.t, self.h, self.u)


@dataclass(frozen=True)
class StratificationReport:
    min: float
    max: float
    h_floor: float
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.min >= self.h_floor))


def compute_H(grid, h):
    """Isopycnal height ``int_rho^rho1 h``; zero at the bottom density."""
    return grid.integrate_rho_upper(h)


def check_stratification(grid, state, profile, params):
    """Extremes of the total thickness against ``params.h_floor``.

    ``state`` may be a state object or a bare thickness array.
    """
    h = getattr(state, "h", state)
    total = profile.hbar_b(grid) + h
    return StratificationReport(float(total.min()), float(total.max()), params.h_floor)


def require_stratification(grid, state, profile, params):
    rep = check_stratification(grid, state, profile, params)
    if not rep.passed:
        raise StratificationError(
            f"min(hbar + h) = {rep.min:.6g} below floor {rep.h_floor:g}", rep
        )
    return rep


def _divergence_source(grid, h, u, profile):
    # (hbar + h) div u + grad H . (ubar' + d_rho u)
    total = profile.hbar_b(grid) + h
    gH = grid.grad(compute_H(grid, h))
    shear = profile.ubar_prime_b(grid) + grid.ddrho(u)
    out = grid.product(total, grid.div(u))
    for i in range(grid.d):
        out = out + grid.product(gH[i], shear[i])
    return out


def init_w(grid, h, u, profile):
    """Vertical velocity making ``(h, u, w)`` satisfy the incompressibility constraint.

    Returns
    -------
    ndarray
        ``w = -int_rho^rho1 [(hbar + h) div u + grad H . (ubar' + d_rho u)]``,
        exactly zero at the bottom density.
    """
    return -grid.integrate_rho_upper(_divergence_source(grid, h, u, profile))


def incompressibility_field(grid, h, u, w, profile):
    """Pointwise residual of the incompressibility constraint."""
    return grid.ddrho(w) - _divergence_source(grid, h, u, profile)
