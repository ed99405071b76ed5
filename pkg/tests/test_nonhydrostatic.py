import numpy as np
import pytest

from isoflow import (
    BackgroundProfile,
    CFLError,
    Grid,
    NonHydroState,
    Params,
    compute_H,
    init_w,
    rhs_nonhydro,
    run_nonhydro,
    step_nonhydro,
)
from isoflow.diagnostics import energy_nonhydro, total_mass
from isoflow.nonhydrostatic import constraint_residual


def _prepared(grid, prof, amp=0.1):
    x, r = grid.x[0], grid.rho_b
    h = amp * np.cos(x) * np.cos(np.pi * (r - 1))
    u = (amp * np.sin(x) * (r - 0.5))[None]
    return NonHydroState(0.0, h, u, init_w(grid, h, u, prof))


@pytest.fixture
def p():
    return Params(mu=1e-3, kappa=0.1, solver_tol=1e-12)


def test_rest_state(grid, rest, p):
    s = NonHydroState(0.0, grid.zeros(), grid.zeros(1), grid.zeros())
    for t in rhs_nonhydro(grid, s, rest, p):
        assert np.max(np.abs(t)) < 1e-10
    new = step_nonhydro(grid, s, rest, p, 0.01)
    assert max(np.max(np.abs(a)) for a in new.arrays()) < 1e-12


def test_x_independent_state(grid, rest, p):
    r = grid.rho_b + 0 * grid.x[0]
    h, u = 0.2 * np.sin(3 * r), (0.1 * r)[None]
    s = NonHydroState(0.0, h, u, init_w(grid, h, u, rest))
    dh, du, dw = rhs_nonhydro(grid, s, rest, p)
    assert np.max(np.abs(dh)) < 1e-13 and np.max(np.abs(du)) < 1e-13
    assert np.max(np.abs(dw)) < 1e-7


def test_requires_mu(grid, rest):
    s = NonHydroState(0.0, grid.zeros(), grid.zeros(1), grid.zeros())
    with pytest.raises(ValueError):
        rhs_nonhydro(grid, s, rest, Params())


def test_vertical_tendency_bounded_in_mu(grid, rest):
    s = _prepared(grid, rest)
    norms = []
    for mu in (1e-2, 1e-3, 1e-4):
        _, _, dw = rhs_nonhydro(grid, s, rest, Params(mu=mu, kappa=0.1, solver_tol=1e-12))
        norms.append(grid.l2_norm(dw))
    assert max(norms) < 2.0 * min(norms)


def test_wave_cfl_guard(grid, rest, p):
    with pytest.raises(CFLError):
        step_nonhydro(grid, _prepared(grid, rest), rest, p, 0.5)


def test_mass_conservation(grid, rest, p):
    s0 = _prepared(grid, rest)
    traj = run_nonhydro(grid, s0, rest, p, 0.01, 100, 20)
    assert traj.completed
    vol = grid.integral(rest.hbar_b(grid) + s0.h)
    drift = max(abs(total_mass(grid, s.h) - total_mass(grid, s0.h)) for s in traj.states) / vol
    assert drift < 1e-11


def test_time_order_four():
    g = Grid(16, 8)
    prof = BackgroundProfile.uniform(g, ubar=0.3, shear=0.2)
    s0 = _prepared(g, prof)
    p = Params(mu=0.01, kappa=0.1, solver_tol=1e-13)

    def run(dt, T=0.2):
        s, cache = s0, {}
        for _ in range(int(round(T / dt))):
            s = step_nonhydro(g, s, prof, p, dt, cache)
        return s

    dts = (0.04, 0.02, 0.01)
    ref = run(dts[-1] / 16)
    errs = []
    for dt in dts:
        s = run(dt)
        errs.append(np.hypot(g.l2_norm(s.h - ref.h), g.l2_norm(s.u - ref.u)))
    order = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(order - 4.0) <= 0.3)


def test_constraint_residual_examples(grid, rest):
    s = _prepared(grid, rest)
    div, bottom = constraint_residual(grid, s, rest)
    assert bottom == 0.0
    rng = np.random.default_rng(0)
    w = s.w + 0.01 * rng.normal(size=grid.shape)
    div2, _ = constraint_residual(grid, NonHydroState(0.0, s.h, s.u, w), rest)
    assert div2 > div
    z = NonHydroState(0.0, grid.zeros(), grid.zeros(1), grid.zeros())
    assert constraint_residual(grid, z, rest) == (0.0, 0.0)


def test_constraint_residual_second_order():
    res = []
    for n in (16, 32, 64):
        g = Grid(16, n)
        prof = BackgroundProfile.uniform(g)
        res.append(constraint_residual(g, _prepared(g, prof), prof)[0])
    assert np.all(np.log2(np.array(res[:-1]) / res[1:]) > 1.8)


@pytest.mark.parametrize("nrho", [16, 32])
def test_height_transport_identity(nrho):
    # d_t H + (ubar + u) . grad H - w = kappa Lap H, centred in time
    g = Grid(32, nrho)
    prof = BackgroundProfile.uniform(g, ubar=0.2, shear=0.3)
    p = Params(mu=1e-3, kappa=0.1, solver_tol=1e-12)
    dt, cache = 1e-3, {}
    s0 = _prepared(g, prof)
    s1 = step_nonhydro(g, s0, prof, p, dt, cache)
    s2 = step_nonhydro(g, s1, prof, p, dt, cache)
    H0, H1, H2 = (compute_H(g, s.h) for s in (s0, s1, s2))
    dHdt = (H2 - H0) / (2 * dt)
    res = dHdt + np.sum((prof.ubar_b(g) + s1.u) * g.grad(H1), axis=0) - s1.w - p.kappa * g.laplacian(H1)
    assert g.l2_norm(res) < 0.2 * g.drho**2 * g.l2_norm(dHdt)


def test_mu_uniform_stepping():
    g = Grid(32, 16)
    prof = BackgroundProfile.uniform(g)
    for mu in (1e-2, 1e-3, 1e-4):
        traj = run_nonhydro(g, _prepared(g, prof), prof, Params(mu=mu, kappa=0.1), 0.01, 20, 20)
        assert traj.completed


def test_energy_bounded(grid, rest, p):
    traj = run_nonhydro(grid, _prepared(grid, rest), rest, p, 0.01, 50, 10)
    E = [energy_nonhydro(grid, compute_H(grid, s.h), s.u, s.w, s.h, rest, p) for s in traj.states]
    assert np.all(np.isfinite(E)) and max(E) <= 1.05 * E[0]


def test_warm_start_cache(grid, rest, p):
    cache = {}
    s = _prepared(grid, rest)
    rhs_nonhydro(grid, s, rest, p, cache)
    cold = cache["solution"].iterations
    rhs_nonhydro(grid, s, rest, p, cache)
    assert cache["solution"].iterations < cold
