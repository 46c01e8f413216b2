"""One test per acceptance criterion; each files a pass/fail line in the terminal summary."""
import os
import time
import warnings

import numpy as np

from klab import asymp
from klab.classnorms import decay_exponent_fit, gate_for, k_norm, m_norm, y_norm, y_tilde_norm
from klab.cli import main
from klab.data import gaussian, gaussian_rho, make_data
from klab.diag import build_diagonalizer, residuals
from klab.diagnostics import scaling_sweep, split_report, sprime_split
from klab.families import FAMILIES, build_problem
from klab.functional import l2_sq, nonlocal_value
from klab.grid import build_grid
from klab.solver import direct_solve, fixed_point_solve, spectral_values, uniqueness_probe
from klab.symbol import characteristic_roots, coupled_symbol, quadratic_form
from klab.verify import hamiltonian, prescribed_path

from oracles import gaussian_m_norm, sphere_area, tau_norm_isotropic


def quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


# 1 ---------------------------------------------------------------- roots

def radical_roots(a1, a2, p1p2, s):
    """Four roots of the coupled pair on |xi| = 1 from the nested radical."""
    c1, c2 = a1 * (1 + s), a2 * (1 + s)
    inner = np.sqrt((c1 - c2) ** 2 + 4 * p1p2)
    outer = np.array([np.sqrt((c1 + c2 + inner) / 2), np.sqrt((c1 + c2 - inner) / 2)])
    return np.sort(np.concatenate([outer, -outer]))


def draw_coupled(rng, dim=3):
    while True:
        a1, a2 = rng.uniform(0.3, 3.0, 2)
        M1, M2 = (rng.uniform(-0.5, 0.5, (dim, dim)) for _ in range(2))
        M1, M2 = 0.5 * (M1 + M1.T), 0.5 * (M2 + M2.T)
        om = rng.standard_normal(dim)
        om /= np.linalg.norm(om)
        p1p2 = (om @ M1 @ om) * (om @ M2 @ om)
        ok = ((a1 - a2) ** 2 + 4 * p1p2 > 1e-2 and a1 * a2 - p1p2 > 1e-2
              and a1**2 * a2**2 - p1p2 > 1e-2 and abs(a1 - a2) > 1e-2)
        if ok:
            return a1, a2, M1, M2, om, p1p2


def test_criterion_01_closed_form_roots(record):
    rng = np.random.default_rng(20261014)
    worst, elapsed = 0.0, 0.0
    for _ in range(1000):
        a1, a2, M1, M2, om, p1p2 = draw_coupled(rng)
        s = rng.uniform(0, 1)
        model = coupled_symbol(a1, a2, quadratic_form(M1), quadratic_form(M2), check_omegas=om[None])
        t0 = time.perf_counter()
        roots = characteristic_roots(model, s, om, check_gap=False, with_derivative=False).roots
        elapsed += time.perf_counter() - t0
        ref = radical_roots(a1, a2, p1p2, s)
        worst = max(worst, float(np.abs(roots - ref).max() / np.abs(ref).max()))
    ok = worst < 1e-10 and elapsed < 1.0
    record(1, ok, f"max rel error {worst:.2e} (< 1e-10) over 1000 draws, solver time {elapsed:.2f} s (< 1 s)")
    assert ok


# 2 ---------------------------------------------------------- diagonalizer

def random_family(name, rng):
    if name == "wave":
        return build_problem(name, c=rng.uniform(0.2, 3.0))
    if name == "kirchhoff":
        return build_problem(name, a0=rng.uniform(0.2, 3.0), a1=rng.uniform(0.0, 3.0))
    if name == "spagnolo":
        return build_problem(name, delta=rng.uniform(0.2, 2.0))
    if name == "coupled":
        while True:
            a1, a2 = rng.uniform(0.3, 3.0, 2)
            p1, p2 = rng.uniform(-0.5, 0.5, 2)
            if abs(a1 - a2) > 0.1 and a1 * a2 - p1 * p2 > 0.05 and (a1 - a2) ** 2 + 4 * p1 * p2 > 0.05:
                return build_problem(name, a1=a1, a2=a2, p1=p1, p2=p2)
    if name == "fourth_order":
        b1 = rng.uniform(0.2, 2.0)
        return build_problem(name, b1=b1, b2=b1 + rng.uniform(0.3, 3.0))
    raise KeyError(name)


def test_criterion_02_diagonalizer_residuals(record):
    rng = np.random.default_rng(2)
    names = sorted(FAMILIES)
    worst_r, worst_i, det_min = 0.0, 0.0, np.inf
    t0 = time.perf_counter()
    for k in range(1000):
        p = random_family(names[k % len(names)], rng)
        s = rng.uniform(0, p.symbol.delta, 4)[:, None]
        om = np.array([[-1.0], [1.0]])[None]
        A = p.symbol(s, om)
        rs = characteristic_roots(p.symbol, s, om, with_derivative=False)
        d = build_diagonalizer(A, rs.roots)
        r1, r2 = residuals(A, d)
        worst_r, worst_i = max(worst_r, r1), max(worst_i, r2)
        det_min = min(det_min, float(d.det_abs.min()))
    elapsed = time.perf_counter() - t0
    ok = worst_r < 1e-9 and worst_i < 1e-10 and det_min >= 1e-6 and elapsed < 5
    record(2, ok, f"|NA-DN|/|A| {worst_r:.1e} (< 1e-9), |NN^-1-I| {worst_i:.1e} (< 1e-10), "
                  f"min|det N| {det_min:.2e} (>= 1e-6), {elapsed:.1f} s (< 5 s)")
    assert ok


# 3 ---------------------------------------------------------- representation

def test_criterion_03_representation(record):
    g = build_grid(1, 10.0, 128)
    dt, T = 0.005, 5.0
    t = dt * np.arange(int(round(T / dt)) + 1)
    idx = [int(round(x / dt)) for x in (1.0, 2.0, 5.0)]
    worst = 0.0
    t0 = time.perf_counter()
    for name in sorted(FAMILIES):
        p = build_problem(name)
        V0 = spectral_values(p.default_data().normalized_l2(g, 1e-3), g, p.m)
        s0 = float(nonlocal_value(g, p.weight, V0))
        s, sp = prescribed_path(p, s0, t)
        tables = asymp.build_tables(p.symbol, g, t, s, sp)
        amps = asymp.integrate_amplitudes(tables, tables.N(0)[:, None] @ V0[..., None])
        U = asymp.evaluate_representation(tables, amps)
        ref = asymp.mode_solve(p.symbol, g, tables.coef, V0)
        for k in idx:
            err = np.sqrt(l2_sq(g, U[k] - ref[k]) / l2_sq(g, ref[k]))
            worst = max(worst, float(err))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 30
    record(3, ok, f"max rel L2 difference {worst:.2e} (< 1e-6) at t = 1, 2, 5 over "
                  f"{len(FAMILIES)} families, {elapsed:.1f} s (< 30 s)")
    assert ok


# 4 ---------------------------------------------------------- amplitude bounds

PICARD_QUADRATURE_RTOL = 5e-3


def test_criterion_04_amplitude_bounds(record):
    g = build_grid(1, 10.0, 64)
    dt, T = 0.01, 5.0
    t = dt * np.arange(int(round(T / dt)) + 1)
    ok_bound, worst_picard, cs = True, -np.inf, {}
    t0 = time.perf_counter()
    for name in sorted(FAMILIES):
        p = build_problem(name)
        s0 = 0.2 * p.symbol.delta
        s, sp = prescribed_path(p, s0, t, amplitude=0.2 * p.symbol.delta)
        tables = asymp.build_tables(p.symbol, g, t, s, sp)
        amps = asymp.integrate_amplitudes(tables)
        b = asymp.amplitude_bound(tables, amps)
        cs[name] = b["c"]
        mag = np.linalg.norm(amps.a, axis=-2)
        allowed = np.exp(b["c"] * tables.tv_N)[:, None, None] * mag[0]
        ok_bound &= bool(np.all(mag <= allowed * (1 + 1e-12) + 1e-300)) and b["c"] <= b["c_theory"]
        norms, bounds = asymp.picard_term_report(tables, terms=8)
        nj, bj = norms[1:], bounds[1:]
        excess = np.where(bj > 0, nj / np.where(bj > 0, bj, 1), 0.0).max() - 1
        worst_picard = max(worst_picard, float(excess))
    elapsed = time.perf_counter() - t0
    ok = ok_bound and worst_picard <= PICARD_QUADRATURE_RTOL and elapsed < 30
    record(4, ok, f"sup|a| <= exp(c TV_N)|a(0)| at every node: {ok_bound} "
                  f"(max c {max(cs.values()):.3g}); Picard j <= 8 max term/bound - 1 = {worst_picard:.1e} "
                  f"(<= {PICARD_QUADRATURE_RTOL:g}); {elapsed:.1f} s (< 30 s)")
    assert ok


# 5 ---------------------------------------------------------- cross-solver

def test_criterion_05_cross_solver(record):
    g = build_grid(1, 10.0, 64)
    out = []
    ok = True
    t0 = time.perf_counter()
    for name in ("kirchhoff", "coupled"):
        p = build_problem(name)
        d = p.default_data().normalized_l2(g, 1e-3)
        assert gate_for(d, g).passed
        fp = fixed_point_solve(p, d, g, 2.0, 0.005, tol=1e-10, snapshots=[1.0])
        dr = direct_solve(p, d, g, 2.0, 0.005, snapshots=[1.0])
        a, b = fp.field_at(1.0).values, dr.field_at(1.0).values
        err = float(np.sqrt(l2_sq(g, a - b) / l2_sq(g, b)))
        its = fp.info["iterations"]
        ok &= err < 1e-6 and its <= 30
        out.append(f"{name}: rel L2 {err:.1e}, {its} iterations")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(5, ok, "; ".join(out) + f" (< 1e-6, <= 30); {elapsed:.1f} s")
    assert ok


# 6 ---------------------------------------------------------- Hamiltonian

def test_criterion_06_hamiltonian(record):
    p = build_problem("kirchhoff", a0=1.0, a1=1.0)
    g = build_grid(1, 16.0, 64)
    d = p.default_data().normalized_l2(g, 0.2)  # s(0) = |grad u|^2 = 0.2
    T = 20.0
    t0 = time.perf_counter()
    runs = {dt: quiet(direct_solve, p, d, g, T, dt, snapshots=[T]) for dt in (0.01, 0.005, 0.0025)}
    fa, fb, fc = (runs[dt].field_at(T).values for dt in (0.01, 0.005, 0.0025))
    order = float(np.log2(np.sqrt(l2_sq(g, fa - fb) / l2_sq(g, fb - fc))))
    E = hamiltonian(p, runs[0.0025])
    drift = float(np.abs(E - E[0]).max() / E[0])
    elapsed = time.perf_counter() - t0
    ok = drift < 1e-6 and order >= 3.8 and elapsed < 120
    record(6, ok, f"relative drift {drift:.1e} (< 1e-6) over [0, 20] at dt 2.5e-3, "
                  f"self-convergence order {order:.2f} (>= 3.8), {elapsed:.1f} s")
    assert ok


# 7 ---------------------------------------------------------- s' split

def test_criterion_07_sprime_split(record):
    g = build_grid(1, 10.0, 64)
    out, ok = [], True
    t0 = time.perf_counter()
    for name in ("kirchhoff", "coupled", "fourth_order"):
        p = build_problem(name)
        d = p.default_data().normalized_l2(g, 1e-3)
        rec = fixed_point_solve(p, d, g, 2.0, 0.005)
        sp = sprime_split(rec, p, g)
        r = split_report(sp, rec.trajectory.s_values)
        rel = r["error"] / r["max_sprime"]
        ok &= rel < 1e-5 and r["diagonal_residue"] < 1e-10
        out.append(f"{name} {rel:.1e}/{r['diagonal_residue']:.0e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    record(7, ok, "|s'_fd - 2(I+J)|/max|s'| and diagonal residue: " + ", ".join(out)
           + f" (< 1e-5, < 1e-10); {elapsed:.1f} s")
    assert ok


# 8 ---------------------------------------------------------- scaling

def test_criterion_08_core_scaling(record):
    g = build_grid(1, 10.0, 64)
    out, ok = [], True
    t0 = time.perf_counter()
    for name in ("kirchhoff", "coupled"):
        p = build_problem(name)
        d = p.default_data().normalized_l2(g, 1e-3)
        sw = quiet(scaling_sweep, lambda x: direct_solve(p, x, g, 5.0, 0.005), p, g, d, (0.5, 0.25, 0.125))
        ok &= sw["tv_scaling_error"] < 0.2 and sw["ratio_spread"] < 0.3
        out.append(f"{name}: TV/lam^2 deviation {sw['tv_scaling_error']:.1e}, ratio spread "
                   f"{sw['ratio_spread']:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(8, ok, "; ".join(out) + f" (< 0.2, < 0.3); {elapsed:.1f} s")
    assert ok


# 9 ---------------------------------------------------------- norm oracles

def test_criterion_09_norm_oracles(record):
    t0 = time.perf_counter()
    errs = {}
    for n, res in ((1, None), (2, 16), (3, (8, 16))):
        g = build_grid(n, 10.0, 64, res)
        errs[f"y(n={n})"] = abs(y_norm(gaussian(1), g) / tau_norm_isotropic([(1.0, n, 1.0)], sphere_area(n)) - 1)
    g = build_grid(1, 10.0, 64)
    f0, f1 = gaussian(1), gaussian_rho(1, power=1)
    errs["y_tilde"] = abs(y_tilde_norm(f0, f1, g) / tau_norm_isotropic([(1.0, 1, 1.0)] * 4, 2.0) - 1)
    errs["k"] = abs(k_norm(f0, f1, g) / tau_norm_isotropic([(1.0, 3, 1.0)] * 4, 2.0) - 1)
    errs["m"] = abs(m_norm(gaussian(2, weights=[1.0, 0.5]), g) / gaussian_m_norm([1.0, 0.5], 1.0, 1, 10.0) - 1)
    hom = 0.0
    V = gaussian(2, weights=[1.0, 0.3]).on_grid(g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the rho^-1 pairing of Y~ meets non-vanishing data here
        for lam in (3.0, 1 / 7):
            pairs = [(y_norm(lam * V, g), y_norm(V, g)),
                     (y_tilde_norm(lam * V[..., 0], lam * V[..., 1], g), y_tilde_norm(V[..., 0], V[..., 1], g)),
                     (k_norm(lam * V[..., 0], lam * V[..., 1], g), k_norm(V[..., 0], V[..., 1], g)),
                     (m_norm(gaussian(1).scaled(lam), g), m_norm(gaussian(1), g))]
            hom = max(hom, max(abs(a - lam**2 * b) / (lam**2 * b) for a, b in pairs))
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    ok = worst < 1e-4 and hom < 1e-12 and elapsed < 120
    detail = ", ".join(f"{k} {v:.0e}" for k, v in errs.items())
    record(9, ok, f"oracle rel errors {detail} (< 1e-4); homogeneity {hom:.0e} (< 1e-12); {elapsed:.1f} s")
    assert ok


# 10 --------------------------------------------------------- decay

def test_criterion_10_decay(record):
    t0 = time.perf_counter()
    taus = np.geomspace(10.0, 1e3, 25)
    fits = {}
    for n, res in ((1, None), (2, 8)):
        g = build_grid(n, 10.0, 256, res)
        fits[n] = decay_exponent_fit(gaussian(1), gaussian(1), g, taus)
    elapsed = time.perf_counter() - t0
    ok = min(fits.values()) >= 2.0 and elapsed < 60
    record(10, ok, "fitted decay exponent " + ", ".join(f"n={n}: {k:.3f}" for n, k in fits.items())
           + f" (>= 2) over tau in [10, 1e3]; {elapsed:.1f} s")
    assert ok


# 11 --------------------------------------------------------- uniqueness

def test_criterion_11_uniqueness(record):
    g = build_grid(1, 8.0, 64)
    tol = 1e-10
    worst, checked = 0.0, 0
    ok = True
    t0 = time.perf_counter()
    for pname in ("kirchhoff", "coupled"):
        p = build_problem(pname)
        for dname in ("gaussian", "gaussian_rho", "shell", "bump"):
            d = make_data(dname, p.m, weights=p.default_weights).normalized_l2(g, 1e-3)
            # rescale so each entry sits at half the gate threshold
            d = d.scaled(np.sqrt(5e-3 / quiet(gate_for, d, g).value))
            assert quiet(gate_for, d, g).passed
            u = quiet(uniqueness_probe, p, d, g, 2.0, 0.01, tol=tol)
            checked += 1
            worst = max(worst, u["max_pairwise"])
            ok &= u["all_converged"] and u["max_pairwise"] < 10 * tol
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(11, ok, f"max pairwise sup|s_i - s_j| {worst:.1e} (< {10 * tol:g}) over {checked} catalog "
                   f"entries at gate value 5e-3; {elapsed:.1f} s")
    assert ok


# 12 --------------------------------------------------------- determinism

def test_criterion_12_determinism(record, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem.family = coupled\n"
                   "grid.n_rho = 32\n"
                   "time.T = 1.0\n"
                   "time.dt = 0.01\n"
                   "outputs.snapshots = (0.5, 1.0)\n")
    dirs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for cmd in ("solve", "norms", "roots"):
            assert main([cmd, "--config", str(cfg), "--out", str(out)]) == 0
        dirs.append(out)
    names = sorted(os.listdir(dirs[0]))
    same = names == sorted(os.listdir(dirs[1])) and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names)
    record(12, same, f"{len(names)} artifacts byte-identical across two runs: {same}")
    assert same
