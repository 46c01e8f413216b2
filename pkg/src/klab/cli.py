"""Command-line entry point ``klab``.

Subcommands ``solve``, ``norms``, ``roots``, ``verify`` and ``compare`` read
a RunConfig (``--config`` plus repeatable ``--override section.key=value``)
and write artifacts into ``--out``.  Exit codes: 0 success, 2 config error,
3 solver failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings

import numpy as np

from .classnorms import class_norms, tau_grid, y_norm
from .config import RunConfig
from .data import make_data
from .diagnostics import class_membership, sprime_split
from .errors import ConfigError, KirchhoffError
from .families import build_problem
from .functional import l2_sq
from .grid import build_grid
from .solver import direct_solve, fixed_point_solve, spectral_values
from .symbol import characteristic_roots

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"stage {stage!r} failed: {type(exc).__name__}: {exc}")


def build_inputs(cfg):
    """(problem, data, grid) for a validated RunConfig."""
    try:
        grid = build_grid(cfg["grid.n"], float(cfg["grid.rho_max"]), cfg["grid.n_rho"],
                          cfg["grid.sphere_res"])
    except (ValueError, TypeError) as exc:
        raise ConfigError("grid", str(exc)) from exc
    pparams = cfg.family_params("problem")
    if "dim" not in pparams:
        pparams["dim"] = cfg["grid.n"]
    try:
        problem = build_problem(cfg["problem.family"], **pparams)
    except KeyError as exc:
        raise ConfigError("problem.family", str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError("problem", str(exc)) from exc
    dparams = cfg.family_params("data")
    try:
        if cfg["data.family"] is None:
            data = problem.default_data(**dparams)
        else:
            data = make_data(cfg["data.family"], problem.m, **dparams)
    except (TypeError, ValueError) as exc:
        raise ConfigError("data", str(exc)) from exc
    if cfg["data.l2_sq"] is not None:
        data = data.normalized_l2(grid, float(cfg["data.l2_sq"]))
    data = data.scaled(float(cfg["data.amplitude"]))
    return problem, data, grid


# ----------------------------------------------------------------- writers

def _fmt(x):
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_trajectory(path, rec, split=None):
    traj = rec.trajectory
    energy = np.asarray(rec.info["l2_energy"])
    nan = np.full(traj.t_grid.size, np.nan)
    I = split.I_values if split is not None else nan
    J = split.J_values if split is not None else nan
    rows = zip(traj.t_grid, traj.s_values, traj.sprime_values, I, J, energy)
    write_csv(path, ["t", "s", "sprime", "I", "J", "l2_energy"],
              ([float(v) for v in r] for r in rows))


def write_fields(outdir, rec, grid):
    names = []
    for t, field in sorted(rec.fields.items()):
        name = f"fields_t{t:g}.csv"
        vals = field.values
        rows = ((float(grid.rho_nodes[i]), q, c, float(vals[q, i, c].real), float(vals[q, i, c].imag))
                for q in range(vals.shape[0]) for i in range(vals.shape[1]) for c in range(vals.shape[2]))
        write_csv(os.path.join(outdir, name), ["rho", "omega_index", "component", "re", "im"], rows)
        names.append(name)
    return names


# ----------------------------------------------------------------- stages

def _stage(name, fn):
    try:
        return fn()
    except KirchhoffError as exc:
        raise StageError(name, exc) from exc


def norms_stage(cfg, problem, data, grid):
    taus = tau_grid(cfg["tolerances.tau_max"], int(cfg["tolerances.n_tau"]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = class_norms(data, grid, problem, taus, cfg["tolerances.gate_threshold"],
                          weighted=((1, 1.5),) if data.physical is not None else ())
    return rep, taus


def _snapshots(cfg):
    T = cfg["time.T"]
    snaps = [float(t) for t in cfg["outputs.snapshots"] if abs(t) <= T + 1e-12]
    if cfg["time.two_sided"]:
        return snaps
    return [t for t in snaps if t >= 0]


def solve_stage(cfg, problem, data, grid):
    method = cfg["solver.method"]
    T, dt = cfg["time.T"], cfg["time.dt"]
    snaps = _snapshots(cfg)
    out = {}
    if method in ("direct", "both"):
        out["direct"] = _stage("direct_solve", lambda: direct_solve(
            problem, data, grid, T, dt, snapshots=snaps, two_sided=cfg["time.two_sided"],
            cfl_limit=cfg["tolerances.cfl"]))
    if method in ("fixed_point", "both"):
        out["fixed_point"] = _stage("fixed_point_solve", lambda: fixed_point_solve(
            problem, data, grid, T, dt, tol=cfg["tolerances.fixed_point"],
            max_iters=int(cfg["tolerances.max_iters"]), method=cfg["solver.linear"],
            amp_method=cfg["solver.amplitudes"], snapshots=snaps,
            two_sided=cfg["time.two_sided"], backend=cfg["solver.backend"]))
    return out


def mismatch(runs, grid):
    """Relative L^2 mismatch between the two solvers at every shared snapshot."""
    a, b = runs["direct"], runs["fixed_point"]
    out = {}
    for t in sorted(a.fields):
        ua, ub = a.fields[t].values, b.field_at(t).values
        den = float(l2_sq(grid, ua))
        diff = float(l2_sq(grid, ua - ub))
        out[f"{t:g}"] = math.sqrt(diff / den) if den > 0 else math.sqrt(diff)
    return out


def run_scenario(cfg, outdir):
    """norms -> gate -> solve(s) -> diagnostics; returns a summary dict."""
    os.makedirs(outdir, exist_ok=True)
    problem, data, grid = build_inputs(cfg)
    rep, taus = norms_stage(cfg, problem, data, grid)
    write_json(os.path.join(outdir, "norms.json"), rep.to_dict())
    runs = solve_stage(cfg, problem, data, grid)
    primary = runs.get("fixed_point", runs.get("direct"))
    split = None
    if "fixed_point" in runs and not cfg["time.two_sided"] and cfg["solver.linear"] == "asymptotic":
        split = _stage("diagnostics", lambda: sprime_split(runs["fixed_point"], problem, grid))
    write_trajectory(os.path.join(outdir, "trajectory.csv"), primary, split)
    conv = dict(method=cfg["solver.method"], gate=rep.gate.__dict__)
    if "fixed_point" in runs:
        fp = runs["fixed_point"]
        conv.update(deltas=fp.convergence, iterations=fp.info["iterations"],
                    contraction=fp.info["contraction"],
                    contraction_factor=fp.info["contraction_factor"],
                    class_membership=class_membership(fp, problem, grid,
                                                      cfg["diagnostics.Lambda"],
                                                      cfg["diagnostics.K"]))
    if "direct" in runs:
        conv["direct_class"] = runs["direct"].class_report
    if len(runs) == 2:
        mm = mismatch(runs, grid)
        conv["l2_mismatch"] = max(mm.values()) if mm else 0.0
        conv["l2_mismatch_by_time"] = mm
    write_json(os.path.join(outdir, "convergence.json"), conv)
    if cfg["outputs.fields"]:
        write_fields(outdir, primary, grid)
    return conv


def roots_table(cfg, outdir, n_s=11):
    problem, _, grid = build_inputs(cfg)
    model = problem.symbol
    s = np.linspace(0.0, model.delta, n_s)
    rs = _stage("roots", lambda: characteristic_roots(model, s[:, None], grid.sphere_nodes[None]))
    rows = ((float(s[i]), q, k, float(rs.roots[i, q, k]), float(rs.ds_roots[i, q, k]))
            for i in range(n_s) for q in range(grid.n_omega) for k in range(model.m))
    os.makedirs(outdir, exist_ok=True)
    write_csv(os.path.join(outdir, "roots.csv"), ["s", "omega_index", "k", "root", "ds_root"], rows)
    summary = dict(family=problem.name, gap=float(rs.gap.min()), m=model.m,
                   max_abs_root=float(np.abs(rs.roots).max()))
    write_json(os.path.join(outdir, "roots.json"), summary)
    return summary


# ----------------------------------------------------------------- commands

def cmd_solve(cfg, outdir):
    conv = run_scenario(cfg, outdir)
    msg = f"solve: gate {'pass' if conv['gate']['passed'] else 'FAIL'}"
    if "iterations" in conv:
        msg += f", fixed point in {conv['iterations']} iterations"
    if "l2_mismatch" in conv:
        msg += f", l2_mismatch {conv['l2_mismatch']:.3e}"
    print(msg)
    return EXIT_OK


def cmd_norms(cfg, outdir):
    os.makedirs(outdir, exist_ok=True)
    problem, data, grid = build_inputs(cfg)
    rep, taus = norms_stage(cfg, problem, data, grid)
    write_json(os.path.join(outdir, "norms.json"), rep.to_dict())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = y_norm(spectral_values(data, grid, problem.m), grid, taus, detail=True).profile
    write_csv(os.path.join(outdir, "tau_profile.csv"), ["tau", "y_profile"],
              ((float(t), float(p)) for t, p in zip(taus, prof)))
    print(f"norms: l2_sq {rep.l2_sq:.6e}, y {rep.y_norm:.6e}, "
          f"gate {'pass' if rep.gate.passed else 'FAIL'} (margin {rep.gate.margin:.3e})")
    return EXIT_OK


def cmd_roots(cfg, outdir):
    summary = roots_table(cfg, outdir)
    print(f"roots: {summary['family']} gap {summary['gap']:.6g}")
    return EXIT_OK


def cmd_verify(cfg, outdir):
    from .verify import verify_suite

    os.makedirs(outdir, exist_ok=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        entries = verify_suite(cfg)
    write_json(os.path.join(outdir, "verify.json"), entries)
    failed = [e["name"] for e in entries if not e["passed"]]
    for e in entries:
        print(f"{'PASS' if e['passed'] else 'FAIL'}  {e['name']}: measured {e['measured']} "
              f"threshold {e['threshold']:.3g}")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_compare(cfg, outdir):
    cfg.set("solver.method", "both")
    conv = run_scenario(cfg, outdir)
    mm = conv.get("l2_mismatch", 0.0)
    ok = mm < cfg["tolerances.mismatch"]
    print(f"compare: l2_mismatch {mm:.3e} ({'pass' if ok else 'FAIL'}, "
          f"threshold {cfg['tolerances.mismatch']:g})")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = dict(solve=cmd_solve, norms=cmd_norms, roots=cmd_roots, verify=cmd_verify,
                compare=cmd_compare)


def make_parser():
    p = argparse.ArgumentParser(prog="klab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="path to a section.key = value config file")
    p.add_argument("--out", default=None, help="output directory (default outputs.dir)")
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config entry; repeatable")
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        if args.config:
            cfg = RunConfig.from_file(args.config, args.override)
        else:
            cfg = RunConfig.from_overrides(args.override)
        outdir = args.out or cfg["outputs.dir"]
        return COMMANDS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except KirchhoffError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
