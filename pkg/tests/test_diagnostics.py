from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoflow import BackgroundProfile, Grid, HydroState, NonHydroState, Params, compute_H
from isoflow.diagnostics import (
    RECORD_KEYS,
    NormSpec,
    control_functional,
    control_terms,
    diagnostics_record,
    energy_hydro,
    energy_nonhydro,
    hsk_norm,
    total_mass,
)

from conftest import smooth_field
from oracles import energy_brute


def test_norm_spec_validation():
    with pytest.raises(ValueError):
        NormSpec(1.0, 2)
    with pytest.raises(ValueError):
        NormSpec(1.5, 0.5)
    with pytest.raises(ValueError):
        hsk_norm(Grid(8, 4), np.zeros((8, 5)), 0.5, 0, form="integer")


def test_hsk_zero_and_parseval(grid):
    assert hsk_norm(grid, grid.zeros(), 2, 1) == 0
    f = np.cos(grid.x[0]) + 0 * grid.rho_b
    assert hsk_norm(grid, f, 1, 0) ** 2 == pytest.approx(2 * np.pi, rel=1e-13)


def test_hsk_reduces_to_l2(grid):
    rng = np.random.default_rng(0)
    f = rng.normal(size=grid.shape)
    assert hsk_norm(grid, f) == grid.l2_norm(f)


def test_hsk_density_profile_quadrature():
    errs = []
    for n in (16, 32, 64):
        g = Grid(8, n)
        f = np.sin(2 * g.rho_b) + 0 * g.x[0]
        # ||Lambda f||^2 + ||d_rho f||^2 with f independent of x
        a, b = 1.0, 2.0
        exact_f2 = 0.5 * (b - a) - (np.sin(4 * b) - np.sin(4 * a)) / 8
        exact_d2 = 4 * (0.5 * (b - a) + (np.sin(4 * b) - np.sin(4 * a)) / 8)
        exact = 2 * np.pi * (exact_f2 + exact_d2)
        errs.append(abs(hsk_norm(g, f, 1, 1) ** 2 - exact))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.8)


@given(st.integers(0, 2**31 - 1), st.floats(0, 3), st.floats(0, 1))
def test_hsk_monotone(seed, s, ds):
    g = Grid(16, 8)
    f = smooth_field(g, np.random.default_rng(seed))
    assert hsk_norm(g, f, s + ds, 0) >= hsk_norm(g, f, s, 0) * (1 - 1e-12)
    if s >= 1:
        assert hsk_norm(g, f, s, 1) >= hsk_norm(g, f, s, 0) * (1 - 1e-12)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("s", [1, 2, 3])
def test_integer_form_comparable(d, s):
    g = Grid(16, 8, d=d, ny=8)
    rng = np.random.default_rng(s)
    f = rng.normal(size=g.shape)
    # (1 + |xi|^2)^m expands with multinomial weights, so the two squares differ
    # by at most the largest multinomial coefficient of order s
    upper = max(comb(s, j) for j in range(s + 1)) * (1 if d == 1 else 2 ** (s - 1))
    for k in range(0, min(s, 1) + 1):
        frac, integ = hsk_norm(g, f, s, k), hsk_norm(g, f, s, k, form="integer")
        assert integ <= frac * (1 + 1e-12)
        assert frac**2 <= upper * integ**2 * (1 + 1e-12)


def test_embedding_guard():
    g = Grid(32, 16)
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        f = smooth_field(g, rng, modes=4, amp=1.0)
        for s in (0.5, 1.0, 1.5):
            trace = max(g.surface_norm(f[..., j:j + 1], s) for j in range(g.nrho + 1))
            worst = max(worst, trace / hsk_norm(g, f, s + 0.5, 1))
    assert worst <= 1.5


def test_energy_examples():
    g = Grid(8, 8, lx=1.0)
    prof = BackgroundProfile.uniform(g)
    z = g.zeros()
    assert energy_hydro(g, z, g.zeros(1), z, prof) == 0
    one = np.ones(g.shape)
    assert energy_hydro(g, one, g.zeros(1), z, prof) == pytest.approx(1.0, rel=1e-14)


def test_energy_matches_brute_force(grid, rest):
    rng = np.random.default_rng(2)
    Hd, ud, wd = (0.1 * rng.normal(size=s) for s in (grid.shape, (1,) + grid.shape, grid.shape))
    h = 0.1 * rng.normal(size=grid.shape)
    total = 1.0 + h
    args = (grid.rho, grid.m_weights, grid.weights, grid.cell_area, grid.rho0)
    ref = energy_brute(Hd, ud, total, *args)
    assert energy_hydro(grid, Hd, ud, h, rest) == pytest.approx(ref, rel=1e-12)
    p = Params(mu=0.01, kappa=0.1)
    ref = energy_brute(Hd, ud, total, *args, wdot=wd, mu=p.mu)
    assert energy_nonhydro(grid, Hd, ud, wd, h, rest, p) == pytest.approx(ref, rel=1e-12)


def test_energy_nonhydro_reductions(grid, rest):
    rng = np.random.default_rng(3)
    Hd, ud, wd = (rng.normal(size=s) for s in (grid.shape, (1,) + grid.shape, grid.shape))
    z = grid.zeros()
    assert energy_nonhydro(grid, Hd, ud, wd, z, rest, Params()) == energy_hydro(grid, Hd, ud, z, rest)
    assert energy_nonhydro(grid, z, grid.zeros(1), z, z, rest, Params(mu=0.1, kappa=0.1)) == 0


def test_energy_vertical_term_quadrature():
    errs = []
    mu = 0.01
    for n in (16, 32, 64):
        g = Grid(16, n)
        prof = BackgroundProfile.uniform(g)
        z = g.zeros()
        wd = (g.rho_b - g.rho0) * np.cos(g.x[0])
        e = energy_nonhydro(g, z, g.zeros(1), wd, z, prof, Params(mu=mu, kappa=0.1))
        # mu/2 * pi * int_1^2 rho (rho - 1)^2 = mu/2 * pi * 7/12
        errs.append(abs(e - 0.5 * mu * np.pi * 7 / 12))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.8)


@given(st.floats(-3, 3))
def test_energy_quadratic(lam):
    g = Grid(8, 4)
    prof = BackgroundProfile.uniform(g)
    rng = np.random.default_rng(4)
    Hd, ud, wd = (rng.normal(size=s) for s in (g.shape, (1,) + g.shape, g.shape))
    h = 0.1 * rng.normal(size=g.shape)
    p = Params(mu=0.01, kappa=0.1)
    e1 = energy_nonhydro(g, Hd, ud, wd, h, prof, p)
    e2 = energy_nonhydro(g, lam * Hd, lam * ud, lam * wd, h, prof, p)
    assert e2 == pytest.approx(lam**2 * e1, rel=1e-12, abs=1e-300)


def test_total_mass(grid):
    assert total_mass(grid, grid.zeros()) == 0
    assert total_mass(grid, np.full(grid.shape, 0.3)) == pytest.approx(0.3 * grid.volume, rel=1e-14)
    h = np.cos(2 * grid.x[0]) * grid.rho_b
    assert abs(total_mass(grid, h)) < 1e-14


def _state(grid, seed, nonhydro=True):
    rng = np.random.default_rng(seed)
    h = smooth_field(grid, rng)
    u = smooth_field(grid, rng)[None]
    if nonhydro:
        return NonHydroState(0.0, h, u, smooth_field(grid, rng))
    return HydroState(0.0, h, u)


def test_control_functional(grid, rest):
    p = Params(mu=0.01, kappa=0.1)
    z = NonHydroState(0.0, grid.zeros(), grid.zeros(1), grid.zeros())
    assert control_functional(grid, z, rest, p) == 0
    s = _state(grid, 5)
    a = control_terms(grid, s, rest, p, 1, 1)
    b = control_terms(grid, s, rest, p.with_(kappa=0.2), 1, 1)
    assert a[:4] == b[:4]
    assert b[4] == pytest.approx(np.sqrt(2) * a[4], rel=1e-14)
    assert b[5] == pytest.approx(np.sqrt(2) * a[5], rel=1e-14)
    H = compute_H(grid, s.h)
    manual = (
        hsk_norm(grid, H, 1, 1) + hsk_norm(grid, s.u, 1, 1) + np.sqrt(p.mu) * hsk_norm(grid, s.w, 1, 1)
        + grid.surface_norm(H, 1) + np.sqrt(p.kappa) * hsk_norm(grid, s.h, 1, 1)
        + np.sqrt(p.mu * p.kappa) * hsk_norm(grid, grid.grad(H), 1, 1)
    )
    assert control_functional(grid, s, rest, p, 1, 1) == pytest.approx(manual, rel=1e-14)


def test_diagnostics_record_layout(grid, rest):
    p = Params(mu=0.01, kappa=0.1)
    rec = diagnostics_record(grid, _state(grid, 6), rest, p, 3, "abc")
    assert tuple(rec) == RECORD_KEYS
    assert rec["config_hash"] == "abc" and rec["step"] == 3
    assert all(rec[k] is not None for k in RECORD_KEYS)
    hrec = diagnostics_record(grid, _state(grid, 6, nonhydro=False), rest, p, 0)
    assert tuple(hrec) == RECORD_KEYS
    assert hrec["norm_w"] is None and hrec["E_nonhydro"] is None
