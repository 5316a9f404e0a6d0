"""Command-line entry point.

    virodiff <subcommand> --config run.json [--output DIR] [--quiet] [--seed N]

Subcommands: simulate, steady, spectrum, classify, nondim, verify, sweep.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 verification failure (a monitored bound violated beyond tolerance).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import sweep, verify_IV_decay, verify_T_convergence
from .config import ConfigError, RunConfig, parse_config
from .errors import VirodiffError
from .mesh import Grid
from .model import State, validate
from .nondim import nondimensionalize
from .spectral import (assemble_linearized, classify_stability, compute_R0_field,
                       principal_eigenvalue)
from .steady import multi_start_steady, solve_T_infinity, steady_residual
from .timestep import Trajectory, monitor_bounds, simulate

log = logging.getLogger("virodiff")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
SUBCOMMANDS = ("simulate", "steady", "spectrum", "classify", "nondim", "verify", "sweep")


class VerificationFailure(Exception):
    pass


# -- serialisation -------------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def _coord_header(grid: Grid) -> list[str]:
    return ["node_index", "x"] + (["y"] if grid.dim == 2 else [])


def write_nodal_csv(path: Path, grid: Grid, columns: dict[str, np.ndarray]) -> None:
    header = _coord_header(grid) + list(columns)
    coords = grid.coordinates
    lines = [",".join(header)]
    for j in range(grid.n_nodes):
        row = [str(j)] + [fmt(c[j]) for c in coords] + [fmt(v[j]) for v in columns.values()]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def snapshot_name(step: int, width: int) -> str:
    return f"snap_{step:0{width}d}.csv"


def write_trajectory(out: Path, traj: Trajectory) -> None:
    width = max(6, len(str(traj.snapshot_steps[-1])))
    for step, s in zip(traj.snapshot_steps, traj.snapshots):
        write_nodal_csv(out / snapshot_name(step, width), s.grid, {"T": s.T, "I": s.I, "V": s.V})
    lines = ["step,time"] + [f"{step},{fmt(s.time)}"
                             for step, s in zip(traj.snapshot_steps, traj.snapshots)]
    (out / "times.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory(out: Path, grid: Grid, dt: float = 0.0) -> Trajectory:
    times_path = out / "times.csv"
    if not times_path.exists():
        raise ConfigError(f"no times.csv in {out}; run 'simulate' first", "output.dir")
    rows = [line.split(",") for line in times_path.read_text().splitlines()[1:] if line]
    width = max(6, len(rows[-1][0]))
    traj = Trajectory(dt=dt)
    ncoord = len(_coord_header(grid))
    for step, t in rows:
        data = np.loadtxt(out / snapshot_name(int(step), width), delimiter=",", skiprows=1,
                          ndmin=2)
        T, I, V = data[:, ncoord], data[:, ncoord + 1], data[:, ncoord + 2]
        traj.snapshots.append(State(grid, T, I, V, float(t)))
        traj.snapshot_steps.append(int(step))
    return traj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _echo(cfg: RunConfig) -> dict:
    return {"grid": cfg.grid, "params": cfg.params}


# -- subcommands -----------------------------------------------------------------

def cmd_simulate(cfg, out, seed):
    params = cfg.build_params()
    init = cfg.build_init(params, seed)
    stepper = cfg.build_stepper()
    traj = simulate(init, params, stepper)
    mon = monitor_bounds(traj, params, band=stepper.band)
    if "csv" in cfg.output["formats"]:
        write_trajectory(out, traj)
    stab = classify_stability(params, margin=cfg.analysis["margin"])
    summary = {
        **_echo(cfg),
        "stepper": cfg.stepper,
        "classification": stab.as_dict(),
        "steps": len(traj.monitor_log),
        "snapshots": len(traj.snapshots),
        "min_value": traj.min_value(),
        "monitors": {"runtime_events": traj.events,
                     "sup_bounds": {"passed": mon.passed, "violations": mon.violations,
                                    "max_excess": mon.max_excess}},
    }
    ok = mon.passed and not traj.events
    return summary, ok


def cmd_steady(cfg, out, seed):
    params = cfg.build_params()
    T_inf = solve_T_infinity(params)
    z = np.zeros(params.grid.n_nodes)
    starts = multi_start_steady(params, n_starts=cfg.analysis["n_starts"],
                                seed=0 if seed is None else seed,
                                tol=cfg.analysis["newton_tol"], workers=cfg.analysis["workers"])
    rows = []
    for s in starts:
        if s.result is None:
            rows.append({"start": s.seed_index, "converged": False, "error": s.error})
            continue
        st = s.result.state
        rows.append({"start": s.seed_index, "converged": True,
                     "iterations": s.result.iterations, "residual": s.result.residual,
                     "nonnegative": s.result.nonnegative,
                     "distance_to_clearance": float(max(np.max(np.abs(st.T - T_inf.values)),
                                                        np.max(np.abs(st.I)),
                                                        np.max(np.abs(st.V)))),
                     "sup_I": float(np.max(np.abs(st.I)))})
    if "csv" in cfg.output["formats"]:
        write_nodal_csv(out / "t_infinity.csv", params.grid, {"T_inf": T_inf.values})
    summary = {**_echo(cfg),
               "T_inf_sup": float(np.max(T_inf.values)),
               "T_inf_min": float(np.min(T_inf.values)),
               "bound": params.lambda_sup / params.mu_T,
               "clearance_residual": steady_residual(State(params.grid, T_inf.values, z, z),
                                                     params),
               "newton_starts": rows}
    return summary, True


def cmd_spectrum(cfg, out, seed):
    params = cfg.build_params()
    T_inf = solve_T_infinity(params)
    res = principal_eigenvalue(assemble_linearized(params, T_inf))
    if "csv" in cfg.output["formats"]:
        write_nodal_csv(out / "eigenvector.csv", params.grid,
                        {"phi_I": res.phi_I, "phi_V": res.phi_V,
                         "R0": compute_R0_field(T_inf, params).values})
    summary = {**_echo(cfg), "eta0": res.eta0, "residual": res.residual,
               "iterations": res.iterations, "converged": res.converged, "shift": res.shift}
    return summary, res.converged


def cmd_classify(cfg, out, seed):
    params = cfg.build_params()
    rep = classify_stability(params, margin=cfg.analysis["margin"])
    return {**_echo(cfg), "classification": rep.as_dict(),
            "validation": validate(params)}, rep.converged


def cmd_nondim(cfg, out, seed):
    params = cfg.build_params()
    sc, dp = nondimensionalize(params)
    if "csv" in cfg.output["formats"]:
        write_nodal_csv(out / "q.csv", params.grid, {"q": dp.q.values})
    summary = {**_echo(cfg),
               "scaling": {"t_c": sc.t_c, "x_c": sc.x_c, "T_c": sc.T_c, "I_c": sc.I_c,
                           "V_c": sc.V_c},
               "dimensionless": {"alpha1": dp.alpha1, "alpha2": dp.alpha2, "beta1": dp.beta1,
                                 "beta2": dp.beta2, "q_sup": float(np.max(dp.q.values))}}
    return summary, True


def cmd_verify(cfg, out, seed):
    params = cfg.build_params()
    stepper = cfg.build_stepper()
    traj = read_trajectory(out, params.grid, stepper.resolved_dt(params))
    T_inf = solve_T_infinity(params)
    tc = verify_T_convergence(traj, T_inf, params.mu_T)
    mon = monitor_bounds(traj, params, band=stepper.band)
    report = {
        **_echo(cfg),
        "snapshots": len(traj.snapshots),
        "T_convergence": {"passed": tc.passed, "violations": tc.violations,
                          "upper_bound_passed": tc.upper_passed,
                          "upper_violations": tc.upper_violations,
                          "max_relative_excess": tc.max_relative_excess, "band": tc.band},
        "sup_bounds": {"passed": mon.passed, "violations": mon.violations,
                       "max_excess": mon.max_excess},
        "min_value": mon.min_value,
    }
    try:
        d = verify_IV_decay(traj, cfg.analysis["transient_fraction"])
        report["IV_decay"] = {"rate": d.rate, "r_squared": d.r_squared, "decayed": d.decayed,
                              "final_ratio": d.final_ratio}
    except ValueError as exc:
        report["IV_decay"] = {"error": str(exc)}
    return report, tc.passed and mon.passed


def cmd_sweep(cfg, out, seed):
    if cfg.sweep is None:
        raise ConfigError("the sweep subcommand needs a 'sweep' section", "sweep")
    params = cfg.build_params()
    s = cfg.sweep
    options = {"margin": cfg.analysis["margin"], "epsilon": cfg.analysis["epsilon"],
               "t_window": cfg.analysis["t_window"],
               "transient_fraction": cfg.analysis["transient_fraction"]}
    if s["experiment"] == "decay":
        options["config"] = cfg.build_stepper()
    rows = sweep(params, s["axis"], s["values"], s["experiment"], options,
                 workers=cfg.analysis["workers"])
    if "csv" in cfg.output["formats"]:
        keys = []
        for r in rows:
            keys += [k for k in r if k not in keys]
        lines = [",".join(keys)]
        for r in rows:
            cells = []
            for k in keys:
                v = r.get(k)
                cells.append("" if v is None else fmt(v) if isinstance(v, float)
                             else str(v).replace(",", ";"))
            lines.append(",".join(cells))
        (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {**_echo(cfg), "sweep": s, "rows": rows}, True


COMMANDS = {
    "simulate": cmd_simulate, "steady": cmd_steady, "spectrum": cmd_spectrum,
    "classify": cmd_classify, "nondim": cmd_nondim, "verify": cmd_verify, "sweep": cmd_sweep,
}
SUMMARY_FILE = {"verify": "verify_report.json"}


def run_subcommand(name: str, cfg: RunConfig, output: str | Path | None = None,
                   seed: int | None = None) -> int:
    """Run one subcommand, write its artifacts and return the exit status."""
    out = Path(output if output is not None else cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    try:
        summary, ok = COMMANDS[name](cfg, out, seed)
    except ConfigError as exc:
        return _fail(out, EXIT_CONFIG, exc, getattr(exc, "key", None))
    except (VirodiffError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(out, EXIT_SOLVER, exc)
    except ValueError as exc:
        return _fail(out, EXIT_CONFIG, exc)
    summary["subcommand"] = name
    summary["verdict"] = "pass" if ok else "fail"
    summary["metadata"] = {"wall_clock_seconds": time.perf_counter() - started,
                           "version": __version__, "kernel_backend": kernels.BACKEND}
    if "json" in cfg.output["formats"] or name == "verify":
        write_json(out / SUMMARY_FILE.get(name, "summary.json"), summary)
    log.info("%s finished: %s", name, summary["verdict"])
    if not ok:
        return EXIT_SOLVER if name in ("spectrum", "classify") else EXIT_VERIFY
    return EXIT_OK


def _fail(out: Path | None, code: int, exc: Exception, key=None) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if key is not None:
        record["key"] = key
    if out is not None:
        try:
            write_json(out / "error.json", record)
        except OSError:
            pass
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the JSON run configuration")
    common.add_argument("--output", help="output directory (overrides output.dir)")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for random initial conditions and multi-start searches")
    parser = argparse.ArgumentParser(
        prog="virodiff",
        description="Spatially heterogeneous in-host viral dynamics toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "advance the system in time and write snapshots",
        "steady": "uninfected steady state and multi-start Newton search",
        "spectrum": "principal eigenvalue of the linearisation",
        "classify": "stability classification of the clearance state",
        "nondim": "scaling constants and dimensionless parameters",
        "verify": "check decay and sup-norm bounds on a simulate output directory",
        "sweep": "run an experiment across values of one parameter",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
    except OSError as exc:
        return _fail(None, EXIT_CONFIG, exc, "--config")
    except ConfigError as exc:
        return _fail(Path(args.output) if args.output else None, EXIT_CONFIG, exc, exc.key)
    return run_subcommand(args.command, cfg, args.output, args.seed)


if __name__ == "__main__":
    sys.exit(main())
