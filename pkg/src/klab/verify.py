"""The property battery behind ``klab verify``.

Every check returns ``{name, measured, threshold, pass}``; a check that
raises is recorded as failed with the error text, never propagated.
"""
from __future__ import annotations

import numpy as np

from . import asymp
from .classnorms import smallness_gate, tau_grid, y_norm
from .diag import build_diagonalizer, residuals
from .diagnostics import phi_bound_ratio, scaling_sweep, split_report, sprime_split, tv_additivity
from .errors import ConvergenceError, ParameterRangeError
from .functional import l2_sq, nonlocal_value
from .solver import direct_solve, fixed_point_solve, spectral_values, uniqueness_probe
from .symbol import characteristic_roots


def entry(name, measured, threshold, passed, **extra):
    out = dict(name=name, measured=None if measured is None else float(measured),
               threshold=float(threshold), passed=bool(passed))
    out.update(extra)
    return out


def hamiltonian(problem, rec):
    """E(t) = ||u_t||^2 + int_0^s a for the scalar Kirchhoff family, else ``c^2 s`` for waves."""
    if problem.gauge != "energy" or problem.weight.radial_exponent != 0:
        return None
    comps = rec.info["component_l2"]
    s = rec.trajectory.s_values
    if problem.name == "kirchhoff":
        a0, a1 = problem.params["a0"], problem.params["a1"]
        return comps[:, 1] + a0 * s + 0.5 * a1 * s**2
    if problem.name == "wave":
        return comps[:, 1] + problem.params["c"] ** 2 * s
    return None


def check_symbol(problem, grid, tol, n_s=9):
    model = problem.symbol
    s = np.linspace(0.0, model.delta, n_s)[:, None]
    A = model(s, grid.sphere_nodes[None])
    rs = characteristic_roots(model, s, grid.sphere_nodes[None])
    m = model.m
    eye = np.eye(m)
    dets = np.abs(np.linalg.det(rs.roots[..., :, None, None] * eye - A[..., None, :, :]))
    scale = np.linalg.norm(A, 2, axis=(-2, -1))[..., None] ** m
    worst = float((dets / scale).max())
    return entry("symbol_residual", worst, tol, worst < tol, min_gap=float(rs.gap.min()))


def check_diagonalizer(problem, grid, tol, inv_tol, det_floor, n_s=9):
    model = problem.symbol
    worst = [0.0, 0.0]
    det_min = np.inf
    for s in np.linspace(0.0, model.delta, n_s):
        A = model(s, grid.sphere_nodes)
        rs = characteristic_roots(model, s, grid.sphere_nodes, with_derivative=False)
        d = build_diagonalizer(A, rs.roots, det_floor)
        r1, r2 = residuals(A, d)
        worst = [max(worst[0], r1), max(worst[1], r2)]
        det_min = min(det_min, float(np.min(d.det_abs)))
    ok = worst[0] < tol and worst[1] < inv_tol and det_min >= det_floor
    return entry("diagonalizer_residual", worst[0], tol, ok, inverse_residual=worst[1],
                 det_min=det_min)


def prescribed_path(problem, s0, t_grid, amplitude=None):
    """A smooth admissible s(t) starting at s0, used to freeze coefficients."""
    delta = problem.symbol.delta
    amp = 0.05 * delta if amplitude is None else amplitude
    s = s0 + amp * (1 - np.cos(t_grid))
    sp = amp * np.sin(t_grid)
    return s, sp


def check_representation(problem, grid, V0_fn, T, dt, tol):
    """Asymptotic representation on the run grid against modes on a refined grid."""
    t = asymp_time(T, dt)
    V0 = V0_fn(grid)
    s0 = float(nonlocal_value(grid, problem.weight, V0))
    s, sp = prescribed_path(problem, s0, t)
    tables = asymp.build_tables(problem.symbol, grid, t, s, sp)
    Y0 = tables.N(0)[:, None] @ V0[..., None]
    amps = asymp.integrate_amplitudes(tables, Y0)
    U = asymp.evaluate_representation(tables, amps)
    fine = grid.refined(2)
    coef = asymp.coefficient_path(t, s, sp)
    Uf = asymp.mode_solve(problem.symbol, fine, coef, V0_fn(fine))
    a = l2_sq(grid, U)
    b = l2_sq(fine, Uf)
    sa = nonlocal_value(grid, problem.weight, U)
    sb = nonlocal_value(fine, problem.weight, Uf)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    err = max(float(np.max(np.abs(a - b))) / scale,
              float(np.max(np.abs(sa - sb))) / max(float(np.max(np.abs(sb))), 1e-300))
    if not np.any(np.abs(sb) > 0):
        err = float(np.max(np.abs(a - b))) / scale
    return entry("representation_vs_direct", err, tol, err < tol,
                 reference_n_rho=fine.n_rho), tables, amps, U


def asymp_time(T, dt):
    K = int(round(T / dt))
    return dt * np.arange(K + 1)


def verify_suite(cfg):
    """Run the battery for ``cfg`` (a RunConfig) and return the report list."""
    from .cli import build_inputs

    tol = cfg.section("tolerances")
    entries = []

    def guarded(name, thr, fn):
        try:
            out = fn()
        except Exception as exc:  # failures are data
            out = entry(name, None, thr, False, error=f"{type(exc).__name__}: {exc}")
        if isinstance(out, dict):
            entries.append(out)
        else:
            entries.extend(out)

    problem, data, grid = build_inputs(cfg)
    T, dt = cfg["time.T"], cfg["time.dt"]
    V0 = spectral_values(data, grid, problem.m)

    guarded("symbol_residual", tol["symbol_residual"],
            lambda: check_symbol(problem, grid, tol["symbol_residual"]))
    guarded("diagonalizer_residual", tol["diag_residual"],
            lambda: check_diagonalizer(problem, grid, tol["diag_residual"],
                                       tol["inverse_residual"], tol["det_floor"]))

    state = {}

    def rep():
        e, tables, amps, U = check_representation(
            problem, grid, lambda g: spectral_values(data, g, problem.m), T, dt,
            tol["representation"])
        state.update(tables=tables, amps=amps, U=U)
        return e

    guarded("representation_vs_direct", tol["representation"], rep)

    def amp_bounds():
        tables, amps, U = state["tables"], state["amps"], state["U"]
        b = asymp.amplitude_bound(tables, amps)
        CE = asymp.energy_constant(tables, b["c"])
        u0 = np.sqrt(l2_sq(grid, V0))
        growth = float(np.sqrt(l2_sq(grid, U)).max() / u0) if u0 > 0 else 0.0
        return [entry("amplitude_bound", b["c"], b["c_theory"], b["c"] <= b["c_theory"],
                      tv_N=b["tv_N"]),
                entry("energy_bound", growth, CE, growth <= CE * (1 + 1e-12))]

    guarded("amplitude_bound", 0.0, amp_bounds)

    def smallness():
        y = y_norm(V0, grid, tau_grid(tol["tau_max"], int(tol["n_tau"])))
        g = smallness_gate(l2_sq(grid, V0), y, tol["gate_threshold"])
        state["y"] = y
        return entry("smallness_gate", g.value, g.threshold, g.passed, margin=g.margin)

    guarded("smallness_gate", tol["gate_threshold"], smallness)

    def direct():
        rec = direct_solve(problem, data, grid, T, dt, keep_history=True, cfl_limit=tol["cfl"])
        state["direct"] = rec
        out = []
        E = hamiltonian(problem, rec)
        if E is not None:
            drift = float(np.max(np.abs(E - E[0])) / E[0]) if E[0] > 0 else 0.0
            out.append(entry("hamiltonian_drift", drift, tol["hamiltonian"], drift < tol["hamiltonian"]))
        err, whole = tv_additivity(rec.trajectory)
        rel = err / whole if whole > 0 else 0.0
        out.append(entry("tv_additivity", rel, tol["tv_additivity"], rel < tol["tv_additivity"]))
        return out

    guarded("direct_solve", 0.0, direct)

    def fixed_point():
        rec = fixed_point_solve(problem, data, grid, T, dt, tol=tol["fixed_point"],
                                max_iters=int(tol["max_iters"]))
        state["fp"] = rec
        q = rec.info["contraction_factor"]
        out = [entry("contraction", q, 1.0, q < 1.0, iterations=rec.info["iterations"])]
        if "direct" in state:
            ref = state["direct"].history
            den = l2_sq(grid, ref)
            diff = l2_sq(grid, rec.info["theta"].history - ref)
            mism = float(np.sqrt(np.max(diff / np.where(den > 0, den, np.inf))))
            out.append(entry("cross_solver_mismatch", mism, tol["mismatch"], mism < tol["mismatch"]))
        return out

    def fixed_point_guarded():
        try:
            return fixed_point()
        except ConvergenceError as exc:
            d = getattr(exc, "deltas", [])
            ratios = [b / a for a, b in zip(d[:-1], d[1:]) if a > 0]
            q = max(ratios) if ratios else np.inf
            return entry("contraction", q, 1.0, False, error=str(exc))
        except ParameterRangeError as exc:  # s(0) itself is inadmissible: no map to iterate
            return entry("contraction", np.inf, 1.0, False, error=str(exc))

    guarded("contraction", 1.0, fixed_point_guarded)

    def split():
        rec = state["fp"]
        sp = sprime_split(rec, problem, grid)
        r = split_report(sp, rec.info["theta"].trajectory.s_values, tol["split_rtol"],
                         tol["diagonal_residue"])
        phi = phi_bound_ratio(rec.info["theta"].tables, problem)
        return [entry("sprime_split", r["error"], r["threshold"], r["passed"]),
                entry("diagonal_residue", r["diagonal_residue"], tol["diagonal_residue"],
                      r["diagonal_passed"]),
                entry("phi_pq_bound", phi, 1.0, phi <= 1.0 + 1e-12)]

    guarded("sprime_split", tol["split_rtol"], split)

    def scaling():
        lams = cfg["diagnostics.lambdas"]
        sw = scaling_sweep(lambda d: direct_solve(problem, d, grid, T, dt), problem, grid, data, lams)
        if sw["tv_scaling"] is None:
            return [entry("tv_scaling", 0.0, tol["tv_scaling"], True),
                    entry("core_ratio_spread", 0.0, tol["ratio_spread"], True)]
        return [entry("tv_scaling", sw["tv_scaling_error"], tol["tv_scaling"],
                      sw["tv_scaling_error"] < tol["tv_scaling"]),
                entry("core_ratio_spread", sw["ratio_spread"], tol["ratio_spread"],
                      sw["ratio_spread"] < tol["ratio_spread"])]

    guarded("tv_scaling", tol["tv_scaling"], scaling)

    def homogeneity():
        y1 = y_norm(V0, grid)
        y3 = y_norm(3 * V0, grid)
        rel = abs(y3 - 9 * y1) / (9 * y1) if y1 > 0 else 0.0
        return entry("norm_homogeneity", rel, tol["homogeneity"], rel < tol["homogeneity"])

    guarded("norm_homogeneity", tol["homogeneity"], homogeneity)

    def unique():
        thr = tol["uniqueness_factor"] * tol["fixed_point"]
        u = uniqueness_probe(problem, data, grid, T, dt, tol=tol["fixed_point"],
                             max_iters=int(tol["max_iters"]))
        return entry("uniqueness", u["max_pairwise"], thr,
                     u["all_converged"] and u["max_pairwise"] < thr,
                     lipschitz_measured=u["lipschitz"]["measured"],
                     lipschitz_bound=u["lipschitz"]["bound"])

    guarded("uniqueness", tol["uniqueness_factor"] * tol["fixed_point"], unique)
    return entries

