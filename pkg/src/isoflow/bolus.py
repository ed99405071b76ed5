"""Eddy-induced (bolus) transport velocities of the thickness diffusion closure."""
import numpy as np

from .state import compute_H, require_stratification

__all__ = ["compute_ustar", "compute_wstar", "bolus_divergence_field", "bolus_divergence_residual"]


def compute_ustar(grid, h, profile, params):
    """Horizontal bolus velocity ``-kappa grad h / (hbar + h)``."""
    require_stratification(grid, h, profile, params)
    if params.kappa == 0:
        return grid.zeros(grid.d)
    total = profile.hbar_b(grid) + h
    return grid.dealias(-params.kappa * grid.grad(h) / total)


def compute_wstar(grid, h, profile, params):
    """Vertical bolus velocity ``kappa Lap H - kappa grad h . grad H / (hbar + h)``.

    The Laplacian acts on the integrated height, so the result inherits the
    exact zero of ``H`` at the bottom density.
    """
    require_stratification(grid, h, profile, params)
    if params.kappa == 0:
        return grid.zeros()
    total = profile.hbar_b(grid) + h
    H = compute_H(grid, h)
    gh, gH = grid.grad(h), grid.grad(H)
    flux = grid.dealias(np.sum(gh * gH, axis=0) / total)
    return params.kappa * (grid.laplacian(H) - flux)


def bolus_divergence_field(grid, h, profile, params):
    """Pointwise ``-(hbar + h) div u* - grad H . d_rho u* + d_rho w*``."""
    us = compute_ustar(grid, h, profile, params)
    ws = compute_wstar(grid, h, profile, params)
    total = profile.hbar_b(grid) + h
    gH = grid.grad(compute_H(grid, h))
    dus = grid.ddrho(us)
    out = grid.ddrho(ws) - grid.product(total, grid.div(us))
    for i in range(grid.d):
        out = out - grid.product(gH[i], dus[i])
    return out


def bolus_divergence_residual(grid, h, profile, params):
    """Discrete L2 norm of :func:`bolus_divergence_field`."""
    return grid.l2_norm(bolus_divergence_field(grid, h, profile, params))
