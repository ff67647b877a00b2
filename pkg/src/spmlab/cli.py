"""Command line entry point: ``spmlab run <config.yaml> [--set key=value ...]``.

Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
3 solver failure.
"""
import argparse
import datetime
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from . import config as config_mod
from .coefficients import (NoiseFamily, NoiseMode, Nonlinearity, SampleGrid,
                           check_hypothesis_H, mollify, noise_distance)
from .errors import ConfigError, PreconditionError, QuadratureError, SolverError
from .grid import Field, PeriodicGrid, _jsonable, atomic_write, fmt, write_field, write_trajectory
from .ldp import (RateProblem, estimate_rate, monotone_nonincreasing, small_noise_experiment,
                  weak_continuity_experiment)
from .skeleton import Control, SolverConfig, bump_field, mass_identity_defect, solve_skeleton
from .spde import ENSEMBLE_COLUMNS, ensemble_csv, ensemble_rows, moment_bound_holds

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "SPMLAB_OUTPUT_ROOT"


# --- building objects from a config ---------------------------------------

def build_problem(cfg):
    """Return ``(nl, g, u0, h, solver_cfg)`` for a resolved config."""
    p = cfg.problem
    nl = Nonlinearity(p.m, p.K)
    modes = [NoiseMode(kind=md.kind, amp=md.amp, freq=md.freq, phase=md.phase,
                       cap=md.cap, axis=md.axis) for md in p.modes]
    g = NoiseFamily(modes, K=p.K) if modes else NoiseFamily.zero(K=p.K)
    grid = PeriodicGrid(p.dim, p.cells)
    u0 = initial_field(grid, p.u0)
    h = build_control(p.control, g.K_modes, p.T)
    s = cfg.solver
    scfg = SolverConfig(dt=s.dt, newton_tol=s.newton_tol, newton_max_iter=s.newton_max_iter,
                        regularization_index=s.regularization_n)
    return nl, g, u0, h, scfg


def initial_field(grid, spec):
    if spec.shape == "bump":
        return bump_field(grid, spec.amplitude, spec.center, spec.width)
    if spec.shape == "constant":
        return Field.constant(grid, spec.value)
    return Field.from_function(
        grid, lambda x: spec.value + spec.amplitude * np.sin(2 * np.pi * spec.freq * x[..., 0]))


def build_control(spec, K_modes, T):
    if spec.kind == "zero":
        return Control.zeros(K_modes, T, spec.intervals)
    if spec.kind == "constant":
        if len(spec.levels) != K_modes:
            raise ConfigError(f"problem.control.levels needs {K_modes} entries")
        return Control.constant(spec.levels, T, spec.intervals)
    return Control.random(spec.seed, K_modes, T, spec.intervals, energy=spec.energy)


def output_dir(cfg):
    d = Path(cfg.output.directory)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not d.is_absolute():
        d = Path(root) / d
    return d


class Checks:
    def __init__(self):
        self.items = []

    def add(self, name, passed, **detail):
        self.items.append({"name": name, "passed": bool(passed), **_jsonable(detail)})
        return passed

    @property
    def passed(self):
        return all(c["passed"] for c in self.items)


# --- drivers --------------------------------------------------------------

def drive_solve(cfg, out, checks):
    nl, g, u0, h, scfg = build_problem(cfg)
    hyp = check_hypothesis_H(nl, g)
    checks.add("hypothesis_H", hyp.passed)
    traj = solve_skeleton(nl, g, u0, h, scfg)
    ext = cfg.output.field_format
    write_field(out / f"terminal.{ext}", traj.final)
    if cfg.output.keep_trajectory:
        write_trajectory(out / "trajectory", traj, fmt_ext=ext)
    d = traj.diagnostics
    lines = ["t,mass,min,max"]
    for j, t in enumerate(traj.times):
        lines.append(",".join(fmt(v) for v in (t, d["mass"][j], d["min"][j], d["max"][j])))
    atomic_write(out / "diagnostics.csv", "\n".join(lines) + "\n")
    defect = mass_identity_defect(traj)
    checks.add("mass_identity", defect <= scfg.newton_tol, max_defect=defect)
    ok, sup = moment_bound_holds(traj, nl.m, traj.state(0))
    checks.add("energy_bound", ok, sup_norm=sup)
    e = cfg.experiment
    if e.seeds:
        rows = ensemble_rows(nl, g, u0, e.eps_list, e.seeds, scfg, traj, h=h)
        atomic_write(out / "ensemble.csv", ensemble_csv(rows))
        checks.add("ensemble_finite",
                   all(np.isfinite(r[c]) for r in rows for c in ENSEMBLE_COLUMNS[2:]))


def drive_rate(cfg, out, checks):
    nl, g, u0, h, scfg = build_problem(cfg)
    e, T = cfg.experiment, cfg.problem.T
    if e.target == "uncontrolled":
        h_star = Control.zeros(g.K_modes, T, e.intervals)
    else:
        h_star = h
    target = solve_skeleton(nl, g, u0, h_star, scfg).final
    prob = RateProblem(target, penalty_weight=e.penalty_weight, T=T, K_modes=g.K_modes,
                       intervals=e.intervals, max_iter=e.max_iter, misfit_tol=e.misfit_tol,
                       rounds=e.rounds, gradient=e.gradient)
    est = estimate_rate(prob, nl, g, u0, scfg)
    atomic_write(out / "rate.json", est.to_json() + "\n")
    checks.add("converged", est.converged, misfit=est.misfit)
    checks.add("energy_exact", abs(est.I_est - est.h_opt.recompute_energy()) <= 1e-12)
    checks.add("upper_bound", est.I_est <= 1.1 * h_star.energy + 1e-3,
               I_est=est.I_est, target_energy=h_star.energy)
    descent = all(monotone_nonincreasing(r["objective"], slack=0.0) for r in est.log)
    checks.add("objective_descent", descent)


def drive_ldp_verify(cfg, out, checks):
    nl, g, u0, h, scfg = build_problem(cfg)
    e = cfg.experiment
    weak = weak_continuity_experiment(nl, g, u0, h, e.weak_eps_list, scfg, amplitude=e.amplitude)
    atomic_write(out / "weak_continuity.csv", weak.to_csv())
    d = weak.column("distance_L1")
    checks.add("weak_monotone", monotone_nonincreasing(d, 0.1), distances=d)
    checks.add("weak_ratio", d[-1] <= 0.25 * d[0] or d[0] == 0.0,
               ratio=d[-1] / d[0] if d[0] else 0.0)
    noise = small_noise_experiment(nl, g, u0, h, e.eps_list, e.samples, scfg,
                                   root_seed=e.seed,
                                   common_random_numbers=e.common_random_numbers)
    atomic_write(out / "small_noise.csv", noise.to_csv())
    med = noise.column("median_L1")
    checks.add("small_noise_monotone", monotone_nonincreasing(med, 0.1), medians=med)


def report_mollifier(cfg):
    """Rows (n, theta_n, min a_n, sup |a - a_n|, d(g_n, g)) with the bound checks."""
    nl, g, _, _, _ = build_problem(cfg)
    e = cfg.experiment
    if not e.n_list:
        raise ConfigError("experiment.n_list must be nonempty")
    rows = []
    for n in e.n_list:
        mc = mollify(nl, g, None, n)
        r = np.linspace(-n, n, e.points)
        an = mc.a_n(r)
        err = np.abs(nl.a(r) - an)
        i_min, i_err = int(np.argmin(an)), int(np.argmax(err))
        rows.append({
            "n": n, "theta": mc.theta, "min_a_n": float(an[i_min]),
            "r_min": float(r[i_min]), "sup_error": float(err[i_err]),
            "r_sup": float(r[i_err]), "noise_distance": noise_distance(mc.g_n, g, m=nl.m),
            "lower_ok": bool(an[i_min] >= 2.0 / n), "sup_ok": bool(err[i_err] <= 4.0 / n),
        })
    return rows


MOLLIFIER_COLUMNS = ("n", "theta", "min_a_n", "sup_error", "noise_distance")


def drive_mollify_report(cfg, out, checks):
    rows = report_mollifier(cfg)
    lines = [",".join(MOLLIFIER_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(r[c]) if c == "n" else fmt(r[c]) for c in MOLLIFIER_COLUMNS))
    atomic_write(out / "mollifier.csv", "\n".join(lines) + "\n")
    for r in rows:
        n = r["n"]
        checks.add(f"a_n_lower_bound[n={n}]", r["lower_ok"], n=n, r=r["r_min"],
                   value=r["min_a_n"], bound=2.0 / n)
        checks.add(f"a_n_sup_error[n={n}]", r["sup_ok"], n=n, r=r["r_sup"],
                   value=r["sup_error"], bound=4.0 / n)


def drive_check_hyp_h(cfg, out, checks):
    nl, g, _, _, _ = build_problem(cfg)
    sg = SampleGrid(r_max=cfg.experiment.r_max, dim=cfg.problem.dim)
    rep = check_hypothesis_H(nl, g, sg)
    atomic_write(out / "hypothesis_H.json",
                 json.dumps(_jsonable(rep.as_dict()), indent=2, sort_keys=True) + "\n")
    for name, c in rep.clauses.items():
        checks.add(name, c.passed, slack=c.slack, where=list(c.where))


DRIVERS = {
    "solve": drive_solve,
    "rate": drive_rate,
    "ldp-verify": drive_ldp_verify,
    "mollify-report": drive_mollify_report,
    "check-hyp-h": drive_check_hyp_h,
}


# --- orchestration --------------------------------------------------------

def run(config_path, overrides=(), stream=None):
    """Run the configured driver; returns the exit status."""
    stream = sys.stderr if stream is None else stream
    try:
        cfg = config_mod.load(config_path, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stream)
        return EXIT_CONFIG
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "resolved_config.yaml", cfg.to_yaml())
    checks = Checks()
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.perf_counter()
    status, error = EXIT_OK, None
    try:
        DRIVERS[cfg.experiment.driver](cfg, out, checks)
    except (ConfigError, PreconditionError) as exc:
        status, error = EXIT_CONFIG, f"config error: {exc}"
    except (SolverError, QuadratureError) as exc:
        status, error = EXIT_SOLVER, f"solver error: {exc}"
    if status == EXIT_OK and not checks.passed:
        status = EXIT_CHECK
    wall = time.perf_counter() - t0
    manifest = {
        "driver": cfg.experiment.driver, "config": cfg.to_dict(), "started": started,
        "wall_time_s": wall, "backend": kernels.BACKEND,
        "versions": {"spmlab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "exit_status": status, "error": error,
    }
    atomic_write(out / "manifest.json", json.dumps(_jsonable(manifest), indent=2) + "\n")
    summary = {"passed": status == EXIT_OK, "exit_status": status, "checks": checks.items}
    atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for c in checks.items:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}", file=stream)
    if error:
        print(error, file=stream)
    return status


def main(argv=None):
    parser = argparse.ArgumentParser(prog="spmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the driver named in a config file")
    p_run.add_argument("config")
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry (dotted key)")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.overrides)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
