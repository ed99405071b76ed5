"""Command-line entry point.

Exit codes
----------
0  success
1  unexpected error
2  configuration missing, malformed or invalid
3  guard failure (stratification floor or CFL limit)
4  pressure solver did not converge
"""
import argparse
import sys
from pathlib import Path

from . import experiments
from .config import config_hash, emit_config, parse_config
from .diagnostics import control_terms, diagnostics_record, hsk_norm
from .errors import CFLError, ConfigError, SolverError, StratificationError
from .hydrostatic import run_hydro
from .io import JsonlWriter, write_checkpoint, write_report, write_snapshot
from .nonhydrostatic import constraint_residual, run_nonhydro
from .pressure import solve_pressure
from .state import compute_H

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_SOLVER = 4

_REASON_CODES = {"stratification": EXIT_GUARD, "cfl": EXIT_GUARD, "solver": EXIT_SOLVER}


def _exit_for(failure):
    if not failure:
        return EXIT_OK
    return _REASON_CODES.get(failure.get("reason"), EXIT_ERROR)


def _prepare(args):
    cfg = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective.cfg").write_text(emit_config(cfg), encoding="utf-8")
    return cfg, out, config_hash(cfg)


def _run(args, model):
    cfg, out, tag = _prepare(args)
    grid, profile, params = cfg.grid(), cfg.profile(), cfg.make_params()
    s, k = cfg.output.norm_s, cfg.output.norm_k
    if model == "hydro":
        state, runner = cfg.hydro_state(grid, args.seed), run_hydro
    else:
        state, runner = cfg.nonhydro_state(grid, profile, args.seed), run_nonhydro

    def observe(st, n):
        if cfg.output.snapshots:
            fields = {"h": st.h, "u": st.u}
            if model == "nonhydro":
                fields["w"] = st.w
            write_snapshot(out / "snapshots" / f"step_{n:08d}", fields,
                           {"config_hash": tag, "step": n, "t": st.t})
        return diagnostics_record(grid, st, profile, params, n, tag, s, k)

    with JsonlWriter(out / "diagnostics.jsonl", {"config_hash": tag}) as sink:
        traj = runner(grid, state, profile, params, cfg.time.dt, cfg.time.steps,
                      cfg.output.stride, observe, sink)
    if cfg.output.checkpoint:
        write_checkpoint(out / "checkpoint.bin", traj.final, grid, params)
    if traj.completed:
        print(f"{model} run completed: {cfg.time.steps} steps, t = {traj.final.t:.6g}")
        return EXIT_OK
    print(f"{model} run stopped: {traj.termination['message']}", file=sys.stderr)
    return _exit_for(traj.termination)


def cmd_run_hydro(args):
    return _run(args, "hydro")


def cmd_run_nonhydro(args):
    return _run(args, "nonhydro")


def cmd_solve_pressure(args):
    cfg, out, tag = _prepare(args)
    grid, profile, params = cfg.grid(), cfg.profile(), cfg.make_params()
    state = cfg.nonhydro_state(grid, profile, args.seed)
    sol = solve_pressure(grid, state, profile, params)
    report = {
        "kind": "pressure",
        "config_hash": tag,
        "mu": params.mu,
        "pnh_norm": sol.nh_norm(grid),
        "ph_norm": grid.l2_norm(sol.P_h),
        "iterations": sol.iterations,
        "residual": sol.residual,
        "solver_tol": params.solver_tol,
    }
    write_report(out / "pressure.json", report)
    if cfg.output.snapshots:
        write_snapshot(out / "pressure", {"P": sol.P, "P_h": sol.P_h, "P_nh": sol.P_nh},
                       {"config_hash": tag})
    print(f"|P_nh| = {report['pnh_norm']:.6e} after {sol.iterations} iterations")
    return EXIT_OK


def _study(args, name, fn, **kw):
    cfg, out, tag = _prepare(args)
    report = fn(cfg, seed=args.seed, threads=args.threads, **kw)
    write_report(out / f"{name}.json", report)
    if report.get("status") != "complete":
        print(f"{name} aborted: {report['failure'].get('message', '')}", file=sys.stderr)
        return _exit_for(report["failure"])
    summary = {k: report[k] for k in ("slope", "monotone", "nondecreasing") if k in report}
    print(f"{name}: " + ", ".join(f"{k} = {v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_converge_mu(args):
    return _study(args, "converge_mu", experiments.mu_convergence, out_dir=args.out)


def cmd_pnh_scaling(args):
    return _study(args, "pnh_scaling", experiments.pnh_scaling, out_dir=args.out)


def cmd_nu_limit(args):
    return _study(args, "nu_limit", experiments.nu_limit, out_dir=args.out)


def cmd_lifespan(args):
    return _study(args, "lifespan", experiments.lifespan_chart)


def cmd_norms(args):
    cfg, out, tag = _prepare(args)
    grid, profile, params = cfg.grid(), cfg.profile(), cfg.make_params()
    state = cfg.nonhydro_state(grid, profile, args.seed)
    s, k = cfg.output.norm_s, cfg.output.norm_k
    H = compute_H(grid, state.h)
    div, bottom = constraint_residual(grid, state, profile)
    report = {
        "kind": "norms",
        "config_hash": tag,
        "s": s,
        "k": k,
        "h": hsk_norm(grid, state.h, s, k),
        "H": hsk_norm(grid, H, s, k),
        "u": hsk_norm(grid, state.u, s, k),
        "w": hsk_norm(grid, state.w, s, k),
        "trace_H": grid.surface_norm(H, s),
        "control_terms": control_terms(grid, state, profile, params, s, k),
        "div_residual": div,
        "bottom_w": bottom,
    }
    write_report(out / "norms.json", report)
    print(f"|h| = {report['h']:.6e}, |u| = {report['u']:.6e}, |w| = {report['w']:.6e}")
    return EXIT_OK


COMMANDS = {
    "run-hydro": (cmd_run_hydro, "integrate the hydrostatic system"),
    "run-nonhydro": (cmd_run_nonhydro, "integrate the non-hydrostatic system"),
    "solve-pressure": (cmd_solve_pressure, "solve the pressure problem for the initial state"),
    "converge-mu": (cmd_converge_mu, "hydrostatic-limit rate study"),
    "pnh-scaling": (cmd_pnh_scaling, "non-hydrostatic pressure against mu"),
    "nu-limit": (cmd_nu_limit, "vanishing-viscosity Cauchy study"),
    "lifespan": (cmd_lifespan, "doubling time of the control functional against kappa"),
    "norms": (cmd_norms, "anisotropic norms of the initial state"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="isoflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (fn, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="run configuration")
        p.add_argument("--out", default="./out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, default=None, metavar="N", help="seed of random initial fields")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes for sweeps")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StratificationError, CFLError) as exc:
        print(f"guard failure: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
