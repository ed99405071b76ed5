"""Acceptance criteria, each run at its stated tolerance and time budget."""
import time

import numpy as np
import pytest
import sympy as sp

from isoflow import BackgroundProfile, Grid, HydroState, Params, compute_H, step_hydro
from isoflow.bolus import bolus_divergence_residual
from isoflow.cli import main
from isoflow.config import Mode, emit_config, replace_section
from isoflow.diagnostics import energy_hydro, total_mass
from isoflow.experiments import default_scenario, mu_convergence, nu_limit, pnh_scaling, simulate
from isoflow.hydrostatic import rhs_hydro_linearized
from isoflow.montgomery import apply_M, m_inner
from isoflow.nonhydrostatic import constraint_residual
from isoflow.pressure import apply_operator, assemble_Amu, solve_generic

from conftest import record_acceptance, smooth_field

MU_LIST = (4e-3, 2e-3, 1e-3, 5e-4)


def _order(values):
    v = np.asarray(values, dtype=float)
    return np.log2(v[:-1] / v[1:])


def _mms_forcing(eps, mu, rho0, rho1):
    """Continuous right-hand side for a density-independent thickness.

    The exact pressure vanishes at the surface density and has zero density
    derivative at the bottom, where the cross coefficient also vanishes.
    """
    X, R = sp.symbols("x rho")
    T = 1 + eps * sp.cos(X)
    Hx = sp.diff((rho1 - R) * eps * sp.cos(X), X)
    exact = sp.sin(X) * (R - rho0) * (2 * rho1 - rho0 - R)
    a_hh, a_hr, a_rr = T / R, sp.sqrt(mu) * Hx / R, (1 + mu * Hx**2) / (R * T)
    Px, Pr = sp.sqrt(mu) * sp.diff(exact, X), sp.diff(exact, R)
    Q = sp.sqrt(mu) * sp.diff(a_hh * Px + a_hr * Pr, X) + sp.diff(a_hr * Px + a_rr * Pr, R)
    return sp.lambdify((X, R), Q, "numpy"), sp.lambdify((X, R), exact, "numpy")


def _mms_case(nx, nr, eps, mu):
    g = Grid(nx, nr)
    prof = BackgroundProfile.uniform(g)
    p = Params(mu=mu, kappa=1.0).with_(solver_tol=1e-12)
    x, r = g.x[0], g.rho_b
    h = eps * np.cos(x) + 0 * r
    A = assemble_Amu(g, h, compute_H(g, h), prof, p)
    return g, A, p, x, r


def test_criterion_1_manufactured_pressure():
    t0 = time.perf_counter()
    eps, mu = 0.2, 0.5
    # discrete problem: forcing is the discrete operator applied to P*
    g, A, p, x, r = _mms_case(64, 32, eps, mu)
    exact = np.sin(x) * (r - g.rho0) * (2 * g.rho1 - g.rho0 - r)
    P, _ = solve_generic(g, A, Q0=apply_operator(g, A, exact) / g.weights, params=p)
    discrete = g.l2_norm(P - exact) / g.l2_norm(exact)
    fQ, fP = _mms_forcing(eps, mu, 1.0, 2.0)
    errs = []
    for nx, nr in ((32, 16), (64, 32), (128, 64)):
        g, A, p, x, r = _mms_case(nx, nr, eps, mu)
        P, _ = solve_generic(g, A, Q0=fQ(x, r), params=p)
        errs.append(g.l2_norm(P - fP(x, r)) / g.l2_norm(fP(x, r)))
    order = _order(errs).min()
    elapsed = time.perf_counter() - t0
    ok = discrete <= 1e-8 and order >= 1.8 and elapsed <= 10
    record_acceptance(1, ok, f"relative error {discrete:.2e} (<= 1e-8), order {order:.3f} "
                             f"(>= 1.8), {elapsed:.1f} s (<= 10 s)")
    assert ok


def test_criterion_2_operator_structure():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    g = Grid(32, 16)
    prof = BackgroundProfile.uniform(g)
    worst_m = worst_p = 0.0
    for _ in range(50):
        f, q = rng.normal(size=g.shape), rng.normal(size=g.shape)
        lhs, rhs = m_inner(g, apply_M(g, f), q), m_inner(g, f, apply_M(g, q))
        worst_m = max(worst_m, abs(lhs - rhs) / (np.linalg.norm(f) * np.linalg.norm(q)))
    h = smooth_field(g, rng, amp=0.3)
    A = assemble_Amu(g, h, compute_H(g, h), prof, Params(mu=0.1, kappa=1.0))
    for _ in range(50):
        P, Q = rng.normal(size=g.shape), rng.normal(size=g.shape)
        P[..., 0] = Q[..., 0] = 0.0
        KP, KQ = apply_operator(g, A, P), apply_operator(g, A, Q)
        scale = np.sqrt(abs(np.sum(KP * P)) * abs(np.sum(KQ * Q)))
        worst_p = max(worst_p, abs(np.sum(KP * Q) - np.sum(P * KQ)) / scale)
    min_eig = np.inf
    for amp in (0.3, 0.6, 0.85):
        for mu in (1e-4, 1e-2, 1.0):
            hh = amp * np.cos(g.x[0]) * np.cos(np.pi * (g.rho_b - 1))
            assert (prof.hbar_b(g) + hh).min() >= 0.1
            min_eig = min(min_eig, assemble_Amu(g, hh, compute_H(g, hh), prof,
                                                Params(mu=mu, kappa=1.0)).min_eigenvalue())
    elapsed = time.perf_counter() - t0
    ok = worst_m <= 1e-12 and worst_p <= 1e-12 and min_eig > 0 and elapsed <= 5
    record_acceptance(2, ok, f"M asymmetry {worst_m:.1e}, pressure asymmetry {worst_p:.1e} "
                             f"(<= 1e-12), min eigenvalue {min_eig:.3f} (> 0), {elapsed:.1f} s (<= 5 s)")
    assert ok


def test_criterion_3_mass_conservation():
    t0 = time.perf_counter()
    cfg = default_scenario()
    g, prof = cfg.grid(), cfg.profile()
    drift = {}
    for model in ("hydro", "nonhydro"):
        traj = simulate(cfg, model)
        assert traj.completed and traj.final.t == pytest.approx(1.0)
        mass = np.array([total_mass(g, s.h) for s in traj.states])
        drift[model] = np.max(np.abs(mass - mass[0])) / g.integral(prof.hbar_b(g) + traj.states[0].h)
    elapsed = time.perf_counter() - t0
    ok = max(drift.values()) <= 1e-10 and elapsed <= 30
    record_acceptance(3, ok, f"mass drift hydro {drift['hydro']:.1e}, nonhydro {drift['nonhydro']:.1e} "
                             f"(<= 1e-10), {elapsed:.1f} s (<= 30 s)")
    assert ok


def test_criterion_4_constraint_propagation():
    t0 = time.perf_counter()
    finals, ratio = [], None
    for nrho in (16, 32, 64):
        cfg = replace_section(default_scenario(), "domain", nrho=nrho)
        g, prof = cfg.grid(), cfg.profile()
        traj = simulate(cfg, "nonhydro")
        assert traj.completed
        initial = constraint_residual(g, traj.states[0], prof)[0]
        final = constraint_residual(g, traj.final, prof)[0]
        finals.append(final)
        if nrho == 32:
            ratio = final / initial
    order = _order(finals).min()
    elapsed = time.perf_counter() - t0
    ok = ratio <= 10 and order >= 1.8 and elapsed <= 120
    record_acceptance(4, ok, f"residual growth {ratio:.3f} (<= 10), order {order:.3f} (>= 1.8), "
                             f"{elapsed:.1f} s (<= 120 s)")
    assert ok


def test_criterion_5_linear_energy():
    t0 = time.perf_counter()
    g = Grid(64, 32)
    prof = BackgroundProfile.uniform(g)
    p = Params(kappa=0.0, nu=0.0)
    x, r = g.x[0], g.rho_b
    s = HydroState(0.0, 0.1 * np.cos(x) * np.cos(np.pi * (r - 1)), (0.1 * np.sin(x) * (r - 0.5))[None])

    def energy(st):
        return energy_hydro(g, compute_H(g, st.h), st.u, g.zeros(), prof)

    e0 = energy(s)
    for _ in range(1000):
        s = step_hydro(g, s, prof, p, 1e-3, rhs=rhs_hydro_linearized)
    drift = abs(energy(s) - e0) / e0
    elapsed = time.perf_counter() - t0
    ok = drift <= 1e-8 and s.t == pytest.approx(1.0) and elapsed <= 10
    record_acceptance(5, ok, f"energy drift {drift:.1e} (<= 1e-8), {elapsed:.1f} s (<= 10 s)")
    assert ok


@pytest.mark.slow
def test_criterion_6_hydrostatic_limit():
    t0 = time.perf_counter()
    rep = mu_convergence(default_scenario(), list(MU_LIST))
    elapsed = time.perf_counter() - t0
    dtc = rep["dt_check"]
    ok = (rep["status"] == "complete" and rep["slope"] is not None and 0.9 <= rep["slope"] <= 1.5
          and dtc["relative_change"] < 0.1 and elapsed <= 600)
    record_acceptance(6, ok, f"slope {rep['slope']:.4f} in [0.9, 1.5], dt-halving change "
                             f"{dtc['relative_change']:.1e} (< 0.1), {elapsed:.1f} s (<= 600 s)")
    assert ok


def test_criterion_7_pnh_scaling():
    t0 = time.perf_counter()
    rep = pnh_scaling(default_scenario(), list(MU_LIST))
    elapsed = time.perf_counter() - t0
    ok = rep["slope"] is not None and rep["slope"] >= 0.9 and elapsed <= 60
    record_acceptance(7, ok, f"slope {rep['slope']:.4f} (>= 0.9), {elapsed:.1f} s (<= 60 s)")
    assert ok


def test_criterion_8_nu_limit():
    t0 = time.perf_counter()
    rep = nu_limit(default_scenario(), [1e-2, 1e-3, 1e-4])
    elapsed = time.perf_counter() - t0
    d = rep["distances"]
    ok = rep["status"] == "complete" and len(d) == 2 and d[1] < d[0] and elapsed <= 180
    record_acceptance(8, ok, f"distances {d[0]:.3e} > {d[1]:.3e} at T = 1, {elapsed:.1f} s (<= 180 s)")
    assert ok


def test_criterion_9_bolus_identity():
    t0 = time.perf_counter()
    orders = []
    for slope, rho_dependent in ((0.5, False), (0.0, True)):
        res = []
        for nr in (16, 32, 64, 128):
            g = Grid(32, nr)
            prof = BackgroundProfile.uniform(g, hbar_slope=slope)
            shape = np.cos(np.pi * (g.rho_b - 1)) if rho_dependent else 1.0
            h = 0.1 * np.sin(g.x[0]) * shape + 0 * g.rho_b
            res.append(bolus_divergence_residual(g, h, prof, Params(kappa=0.5)))
        orders.append(_order(res).min())
    elapsed = time.perf_counter() - t0
    ok = min(orders) >= 1.8 and elapsed <= 10
    record_acceptance(9, ok, f"orders {orders[0]:.3f} and {orders[1]:.3f} (>= 1.8), "
                             f"{elapsed:.1f} s (<= 10 s)")
    assert ok


def test_criterion_10_determinism(tmp_path):
    cfg = replace_section(default_scenario(), "domain", nx=16, nrho=8)
    cfg = replace_section(cfg, "initial", noise=0.01)
    cfg = replace_section(cfg, "output", snapshots=True)
    cfg = replace_section(cfg, "study", mu_list=(2e-3, 1e-3), nu_list=(1e-2, 1e-3),
                          kappa_list=(0.1, 0.2), t_max=0.2, dt_check=True)
    path = tmp_path / "run.cfg"
    path.write_text(emit_config(cfg), encoding="utf-8")
    commands = ("run-hydro", "run-nonhydro", "solve-pressure", "converge-mu",
                "pnh-scaling", "nu-limit", "lifespan", "norms")
    mismatched, compared = [], 0
    for cmd in commands:
        outs = [tmp_path / f"{cmd}-{i}" for i in (0, 1)]
        for out in outs:
            assert main([cmd, "--config", str(path), "--out", str(out), "--seed", "11"]) == 0
        files = sorted(f.relative_to(outs[0]) for f in outs[0].rglob("*") if f.is_file())
        assert files == sorted(f.relative_to(outs[1]) for f in outs[1].rglob("*") if f.is_file())
        for rel in files:
            compared += 1
            if (outs[0] / rel).read_bytes() != (outs[1] / rel).read_bytes():
                mismatched.append(f"{cmd}/{rel}")
    ok = not mismatched
    record_acceptance(10, ok, f"{compared} output files from {len(commands)} subcommands compared, "
                              f"{len(mismatched)} differ")
    assert ok, mismatched
