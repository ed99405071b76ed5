"""Anisotropic Sobolev norms, energy functionals and run diagnostics."""
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .state import check_stratification, compute_H, incompressibility_field

__all__ = [
    "NormSpec",
    "hsk_norm",
    "energy_hydro",
    "energy_nonhydro",
    "total_mass",
    "control_terms",
    "control_functional",
    "diagnostics_record",
    "RECORD_KEYS",
]


@dataclass(frozen=True)
class NormSpec:
    """Indices of the anisotropic norm: ``s`` horizontal, ``k`` vertical (integer)."""

    s: float = 0.0
    k: int = 0

    def __post_init__(self):
        if self.s < 0 or self.k < 0 or int(self.k) != self.k or self.k > self.s:
            raise ValueError("norm indices must satisfy 0 <= k <= s with integer k")


def _components(f, grid):
    f = np.asarray(f, dtype=float)
    return [f] if f.ndim == grid.d + 1 else list(f.reshape((-1,) + grid.shape))


def _sq(grid, g):
    return grid.integral(g * g)


def _integer_multiplier(grid, m):
    # sum over multi-indices |alpha| <= m of xi^(2 alpha)
    out = 0.0
    for alpha in iproduct(range(m + 1), repeat=grid.d):
        if sum(alpha) <= m:
            term = 1.0
            for kk, a in zip(grid.k, alpha):
                term = term * kk ** (2 * a)
            out = out + term
    return out


def hsk_norm(grid, f, s=0.0, k=0, form="fractional"):
    """Anisotropic norm ``sum_{j<=k} ||Lambda^(s-j) d_rho^j f||^2`` (square root).

    Parameters
    ----------
    f : ndarray
        Scalar field or stack of components (squares are summed).
    s, k : float, int
        Horizontal and vertical indices, ``0 <= k <= s``.
    form : {"fractional", "integer"}
        ``"integer"`` sums ``||d_x^alpha d_rho^j f||^2`` over all
        ``|alpha| <= s - j`` instead (``s`` must then be an integer).
    """
    NormSpec(s, k)
    if form not in ("fractional", "integer"):
        raise ValueError("form must be 'fractional' or 'integer'")
    if form == "integer" and int(s) != s:
        raise ValueError("integer form requires integer s")
    total = 0.0
    for comp in _components(f, grid):
        g = comp
        for j in range(int(k) + 1):
            if j:
                g = grid.ddrho(g)
            if form == "fractional":
                total += _sq(grid, grid.lambda_s(g, s - j))
            else:
                mult = np.sqrt(_integer_multiplier(grid, int(s) - j))
                total += _sq(grid, grid.apply_multiplier(g, mult))
    return float(np.sqrt(total))


def _total(grid, h, profile):
    return profile.hbar_b(grid) + h


def energy_hydro(grid, Hdot, udot, h, profile):
    """Hydrostatic energy ``1/2 int Hdot^2 + rho (hbar + h)|udot|^2 + rho0/2 int Hdot(rho0)^2``.

    The velocity term uses :attr:`Grid.m_weights`, the density quadrature
    under which the Montgomery operator is self-adjoint; with it the
    linearized system conserves this energy exactly in semi-discrete form.
    """
    a = grid.cell_area
    pot = 0.5 * grid.integral(Hdot * Hdot)
    speed2 = np.sum(udot * udot, axis=0)
    kin = 0.5 * a * float(np.sum(grid.rho * _total(grid, h, profile) * speed2 * grid.m_weights))
    trace = 0.5 * grid.rho0 * a * float(np.sum(Hdot[..., 0] ** 2))
    return pot + kin + trace


def energy_nonhydro(grid, Hdot, udot, wdot, h, profile, params):
    """:func:`energy_hydro` plus ``mu/2 int rho (hbar + h) wdot^2``."""
    base = energy_hydro(grid, Hdot, udot, h, profile)
    if params.mu == 0:
        return base
    vert = 0.5 * params.mu * grid.cell_area * float(
        np.sum(grid.rho * _total(grid, h, profile) * wdot * wdot * grid.m_weights)
    )
    return base + vert


def total_mass(grid, h):
    """Domain integral of ``h``."""
    return grid.integral(h)


def control_terms(grid, state, profile, params, s=0.0, k=0):
    """Individual weighted terms of :func:`control_functional`, in order."""
    H = compute_H(grid, state.h)
    w = getattr(state, "w", None)
    return [
        hsk_norm(grid, H, s, k),
        hsk_norm(grid, state.u, s, k),
        np.sqrt(params.mu) * hsk_norm(grid, w, s, k) if w is not None else 0.0,
        grid.surface_norm(H, s),
        np.sqrt(params.kappa) * hsk_norm(grid, state.h, s, k),
        np.sqrt(params.mu * params.kappa) * hsk_norm(grid, grid.grad(H), s, k),
    ]


def control_functional(grid, state, profile, params, s=0.0, k=0):
    """``|H| + |u| + mu^1/2 |w| + |H(rho0)|_s + kappa^1/2 |h| + (mu kappa)^1/2 |grad H|``."""
    return float(sum(control_terms(grid, state, profile, params, s, k)))


RECORD_KEYS = (
    "kind", "config_hash", "step", "t", "mass",
    "norm_H", "norm_u", "norm_h", "norm_w", "trace_H",
    "E_hydro", "E_nonhydro", "div_residual", "bottom_w",
    "h_min", "h_max", "control",
)


def diagnostics_record(grid, state, profile, params, step, config_hash="", s=0.0, k=0):
    """Diagnostics of one state as a dict with keys :data:`RECORD_KEYS`.

    Entries that do not apply to hydrostatic states are ``None``.
    """
    H = compute_H(grid, state.h)
    w = getattr(state, "w", None)
    rep = check_stratification(grid, state, profile, params)
    e_h = energy_hydro(grid, H, state.u, state.h, profile)
    if w is not None:
        res = incompressibility_field(grid, state.h, state.u, w, profile)
        wb = w[..., -1]
        extra = {
            "norm_w": hsk_norm(grid, w, s, k),
            "E_nonhydro": energy_nonhydro(grid, H, state.u, w, state.h, profile, params),
            "div_residual": grid.l2_norm(res),
            "bottom_w": float(np.sqrt(np.sum(wb * wb) * grid.cell_area)),
        }
    else:
        extra = dict.fromkeys(("norm_w", "E_nonhydro", "div_residual", "bottom_w"))
    values = {
        "kind": "diagnostics",
        "config_hash": config_hash,
        "step": int(step),
        "t": float(state.t),
        "mass": total_mass(grid, state.h),
        "norm_H": hsk_norm(grid, H, s, k),
        "norm_u": hsk_norm(grid, state.u, s, k),
        "norm_h": hsk_norm(grid, state.h, s, k),
        "trace_H": grid.surface_norm(H, s),
        "E_hydro": e_h,
        "h_min": rep.min,
        "h_max": rep.max,
        "control": control_functional(grid, state, profile, params, s, k),
        **extra,
    }
    return {key: values[key] for key in RECORD_KEYS}
