"""Scripted studies: hydrostatic limit, pressure scaling, vanishing viscosity, lifespan.

Every study takes a :class:`isoflow.config.RunConfig` and returns a JSON-ready
report. Independent runs of a sweep may execute in worker processes
(``threads > 1``); reports are always assembled in input order, so the
output does not depend on scheduling.
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import Mode, RunConfig, config_hash, replace_section
from .diagnostics import control_functional, diagnostics_record, hsk_norm
from .errors import CFLError, SolverError, StratificationError
from .hydrostatic import run_hydro, step_hydro
from .io import JsonlWriter
from .nonhydrostatic import run_nonhydro
from .pressure import solve_pressure

__all__ = [
    "default_scenario",
    "simulate",
    "fit_slope",
    "mu_convergence",
    "pnh_scaling",
    "nu_limit",
    "lifespan_chart",
]


def default_scenario():
    """Reference configuration of the convergence studies.

    One horizontal dimension on a 64 x 33 grid, ``hbar = 1``, ``ubar = 0``,
    ``kappa = 0.1``, a single mode of amplitude 0.1 in ``h`` and ``u`` with
    smooth density structure, ``dt = 0.01`` and ``T = 1``.
    """
    cfg = RunConfig()
    return replace_section(
        cfg, "initial",
        h_modes=(Mode((1,), 0.1, "cosine", "cos"),),
        u_modes=(Mode((1,), 0.1, "cosine", "sin"),),
    )


def _params_overrides(cfg, **over):
    changes = {k: v for k, v in over.items() if k in ("mu", "kappa", "nu")}
    return replace_section(cfg, "params", **changes) if changes else cfg


def simulate(cfg, model="hydro", seed=None, dt_scale=1, out_path=None, steps=None):
    """Run one configuration and return its trajectory.

    Parameters
    ----------
    cfg : RunConfig
    model : {"hydro", "nonhydro"}
    seed : int, optional
        Seed of the optional random initial perturbation.
    dt_scale : int
        Divides the time step and multiplies step count and output stride.
    out_path : path-like, optional
        Diagnostics stream destination.
    steps : int, optional
        Override of ``cfg.time.steps`` (before scaling).
    """
    grid, profile, params = cfg.grid(), cfg.profile(), cfg.make_params()
    dt = cfg.time.dt / dt_scale
    nsteps = (cfg.time.steps if steps is None else steps) * dt_scale
    stride = cfg.output.stride * dt_scale
    tag = config_hash(cfg)
    s, k = cfg.output.norm_s, cfg.output.norm_k

    def observe(state, n):
        return diagnostics_record(grid, state, profile, params, n, tag, s, k)

    sink = JsonlWriter(out_path, {"config_hash": tag}) if out_path is not None else None
    try:
        if model == "hydro":
            state = cfg.hydro_state(grid, seed)
            traj = run_hydro(grid, state, profile, params, dt, nsteps, stride, observe, sink)
        elif model == "nonhydro":
            state = cfg.nonhydro_state(grid, profile, seed)
            traj = run_nonhydro(grid, state, profile, params, dt, nsteps, stride, observe, sink)
        else:
            raise ValueError("model must be 'hydro' or 'nonhydro'")
    finally:
        if sink is not None:
            sink.close()
    return traj


def fit_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``.

    Returns
    -------
    slope, residual, flag
        ``flag`` is ``"undefined"`` for fewer than two points,
        ``"degenerate"`` when some ``y`` is not positive, else ``None``.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2:
        return None, None, "undefined"
    if not np.all(y > 0):
        return None, None, "degenerate"
    lx, ly = np.log(x), np.log(y)
    coef = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, lx) - ly) ** 2)))
    return float(coef[0]), resid, None


def _map(fn, tasks, threads):
    if threads and threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, *zip(*tasks)))
    return [fn(*t) for t in tasks]


def _run_path(out_dir, name):
    return None if out_dir is None else Path(out_dir) / "runs" / f"{name}.jsonl"


def _trajectory_error(cfg, a, b):
    grid = cfg.grid()
    s, k = cfg.output.norm_s, cfg.output.norm_k
    err = 0.0
    for p, q in zip(a.states, b.states):
        e = np.hypot(hsk_norm(grid, p.h - q.h, s, k), hsk_norm(grid, p.u - q.u, s, k))
        err = max(err, float(e))
    return err


def _failure(traj):
    return None if traj.completed else dict(traj.termination)


def _mu_task(cfg, mu, model, seed, dt_scale, out_dir):
    run_cfg = _params_overrides(cfg, mu=mu)
    suffix = "" if dt_scale == 1 else f"_dt{dt_scale}"
    return simulate(run_cfg, model, seed, dt_scale, _run_path(out_dir, f"{model}_mu{mu!r}{suffix}"))


def mu_convergence(cfg, mu_list=None, model="nonhydro", seed=None, threads=1, out_dir=None,
                   dt_check=None):
    """Error between the non-hydrostatic and hydrostatic solutions against ``mu``.

    For each ``mu`` both systems start from the same data (``w`` from the
    incompressibility constraint) and the error is the supremum over
    output times of the ``H^{s,k}`` distance of ``(h, u)``. With
    ``model="hydro"`` the hydrostatic solver is compared against itself.

    The time-step check reruns the smallest ``mu`` at half the time step and
    reports the relative change of its error.
    """
    mu_list = list(cfg.study.mu_list if mu_list is None else mu_list)
    dt_check = cfg.study.dt_check if dt_check is None else dt_check
    report = {
        "study": "mu_convergence",
        "config_hash": config_hash(cfg),
        "model": model,
        "norm": {"s": cfg.output.norm_s, "k": cfg.output.norm_k},
        "mu": [],
        "errors": [],
        "slope": None,
        "fit_residual": None,
        "slope_flag": None,
        "dt_check": None,
        "status": "complete",
        "failure": None,
    }
    ref = simulate(cfg, "hydro", seed, 1, _run_path(out_dir, "hydro_reference"))
    if not ref.completed:
        report.update(status="aborted", failure=_failure(ref))
        return report
    tasks = [(cfg, mu, model, seed, 1, out_dir) for mu in mu_list]
    for mu, traj in zip(mu_list, _map(_mu_task, tasks, threads)):
        if not traj.completed:
            report.update(status="aborted", failure=dict(_failure(traj), mu=mu))
            break
        report["mu"].append(mu)
        report["errors"].append(_trajectory_error(cfg, traj, ref))
    slope, resid, flag = fit_slope(report["mu"], report["errors"])
    report.update(slope=slope, fit_residual=resid, slope_flag=flag)
    if report["status"] == "complete" and dt_check and report["mu"]:
        i = int(np.argmin(report["mu"]))
        mu = report["mu"][i]
        ref2 = simulate(cfg, "hydro", seed, 2, _run_path(out_dir, "hydro_reference_dt2"))
        run2 = _mu_task(cfg, mu, model, seed, 2, out_dir)
        if not (ref2.completed and run2.completed):
            report.update(status="aborted", failure=_failure(run2) or _failure(ref2))
            return report
        e1, e2 = report["errors"][i], _trajectory_error(cfg, run2, ref2)
        change = abs(e2 - e1) / e1 if e1 > 0 else 0.0
        report["dt_check"] = {
            "mu": mu, "error": e1, "error_half_dt": e2,
            "relative_change": change, "passed": bool(change < 0.1),
        }
    return report


def pnh_scaling(cfg, mu_list=None, seed=None, threads=1, out_dir=None, rel_floor=1e-12):
    """Norm of the non-hydrostatic pressure of the initial state against ``mu``.

    The slope is flagged ``"degenerate"`` when every norm is below
    ``rel_floor`` times the norm of the hydrostatic pressure (for example
    horizontally uniform or resting states).
    """
    mu_list = list(cfg.study.mu_list if mu_list is None else mu_list)
    grid, profile = cfg.grid(), cfg.profile()
    state = cfg.nonhydro_state(grid, profile, seed)
    report = {
        "study": "pnh_scaling",
        "config_hash": config_hash(cfg),
        "mu": [],
        "pnh_norm": [],
        "ph_norm": None,
        "iterations": [],
        "slope": None,
        "fit_residual": None,
        "slope_flag": None,
        "status": "complete",
        "failure": None,
    }
    scale = None
    for mu in mu_list:
        params = cfg.make_params(mu=mu)
        try:
            sol = solve_pressure(grid, state, profile, params)
        except (SolverError, StratificationError) as exc:
            reason = "solver" if isinstance(exc, SolverError) else "stratification"
            report.update(status="aborted", failure={"reason": reason, "message": str(exc), "mu": mu})
            break
        scale = grid.l2_norm(sol.P_h)
        report["mu"].append(mu)
        report["pnh_norm"].append(sol.nh_norm(grid))
        report["iterations"].append(sol.iterations)
    report["ph_norm"] = scale
    norms = np.asarray(report["pnh_norm"])
    floor = rel_floor * max(scale or 0.0, 1.0)
    if norms.size and np.all(norms <= floor):
        report["slope_flag"] = "degenerate"
    else:
        slope, resid, flag = fit_slope(report["mu"], report["pnh_norm"])
        report.update(slope=slope, fit_residual=resid, slope_flag=flag)
    return report


def _nu_task(cfg, nu, seed, out_dir):
    return simulate(_params_overrides(cfg, nu=nu), "hydro", seed, 1, _run_path(out_dir, f"hydro_nu{nu!r}"))


def nu_limit(cfg, nu_list=None, seed=None, threads=1, out_dir=None):
    """Distances at the final time between hydrostatic runs of consecutive ``nu``."""
    nu_list = list(cfg.study.nu_list if nu_list is None else nu_list)
    if not cfg.params.kappa > 0:
        raise ValueError("the vanishing-viscosity study requires kappa > 0")
    grid = cfg.grid()
    s, k = cfg.output.norm_s, cfg.output.norm_k
    report = {
        "study": "nu_limit",
        "config_hash": config_hash(cfg),
        "nu": [],
        "distances": [],
        "monotone": None,
        "status": "complete",
        "failure": None,
    }
    finals = []
    for nu, traj in zip(nu_list, _map(_nu_task, [(cfg, nu, seed, out_dir) for nu in nu_list], threads)):
        if not traj.completed:
            report.update(status="aborted", failure=dict(_failure(traj), nu=nu))
            break
        report["nu"].append(nu)
        finals.append(traj.final)
    for a, b in zip(finals[:-1], finals[1:]):
        report["distances"].append(
            float(np.hypot(hsk_norm(grid, a.h - b.h, s, k), hsk_norm(grid, a.u - b.u, s, k)))
        )
    dist = report["distances"]
    report["monotone"] = bool(all(x > y for x, y in zip(dist[:-1], dist[1:])))
    return report


def _lifespan_task(cfg, kappa, t_max, seed):
    cfg = _params_overrides(cfg, kappa=kappa)
    grid, profile, params = cfg.grid(), cfg.profile(), cfg.make_params()
    s, k = cfg.output.norm_s, cfg.output.norm_k
    state = cfg.hydro_state(grid, seed)
    f0 = control_functional(grid, state, profile, params, s, k)
    dt = cfg.time.dt
    nsteps = int(round(t_max / dt))
    for n in range(1, nsteps + 1):
        try:
            state = step_hydro(grid, state, profile, params, dt)
        except (StratificationError, CFLError) as exc:
            reason = "stratification" if isinstance(exc, StratificationError) else "cfl"
            return {"kappa": kappa, "t_double": float(state.t + dt), "censored": False,
                    "reason": reason, "F0": f0}
        if control_functional(grid, state, profile, params, s, k) >= 2.0 * f0 and f0 > 0:
            return {"kappa": kappa, "t_double": float(state.t), "censored": False,
                    "reason": "doubled", "F0": f0}
    return {"kappa": kappa, "t_double": None, "censored": True, "reason": "t_max", "F0": f0}


def lifespan_chart(cfg, kappa_list=None, t_max=None, seed=None, threads=1):
    """Time until the control functional doubles, for each ``kappa``.

    Guard failures count as the end of life; runs reaching ``t_max`` are
    censored. Whether the doubling time grows with ``kappa`` is reported,
    not required.
    """
    kappa_list = list(cfg.study.kappa_list if kappa_list is None else kappa_list)
    t_max = cfg.study.t_max if t_max is None else t_max
    profile = cfg.profile()
    rows = _map(_lifespan_task, [(cfg, kap, t_max, seed) for kap in kappa_list], threads)
    times = [np.inf if r["censored"] else r["t_double"] for r in rows]
    return {
        "study": "lifespan",
        "config_hash": config_hash(cfg),
        "t_max": t_max,
        "shear": bool(np.any(profile.ubar_prime_b(cfg.grid()))),
        "rows": rows,
        "nondecreasing": bool(all(a <= b for a, b in zip(times[:-1], times[1:]))),
        "status": "complete",
        "failure": None,
    }
