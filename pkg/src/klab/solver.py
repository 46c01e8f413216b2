"""Nonlinear solvers: direct method of lines and the fixed-point map Theta.

Theta freezes a coefficient path t -> A(s_in(t), .), solves the resulting
linear problem mode by mode and returns the nonlocal term of that solution.
Its fixed points are solutions of the nonlinear system.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import asymp
from .data import DataFamily
from .errors import ConvergenceError, ParameterRangeError, StabilityWarning
from .functional import component_l2_sq, l2_sq, nonlocal_rate, nonlocal_value
from .symbol import characteristic_roots

FP_TOL = 1e-10
MAX_ITERS = 200
DIVERGENCE_PATIENCE = 5
CFL_LIMIT = 1.0


@dataclass(frozen=True, eq=False)
class SpectralField:
    values: np.ndarray  # (Q, R, m)
    grid: object
    t: float = 0.0

    def l2_sq(self):
        return float(l2_sq(self.grid, self.values))

    def l2(self):
        return float(np.sqrt(self.l2_sq()))


@dataclass(frozen=True, eq=False)
class NonlocalTrajectory:
    t_grid: np.ndarray
    s_values: np.ndarray
    sprime_values: np.ndarray
    sprime_method: str = "analytic"

    @property
    def dt(self):
        return float(self.t_grid[1] - self.t_grid[0]) if self.t_grid.size > 1 else 0.0

    def total_variation_between(self, i0=0, i1=None):
        """int |s'| dt over samples i0..i1 (inclusive) by the trapezoid rule."""
        i1 = self.t_grid.size - 1 if i1 is None else i1
        a = np.abs(self.sprime_values[i0:i1 + 1])
        if a.size < 2:
            return 0.0
        return float(abs(self.dt) * (np.sum(a) - 0.5 * (a[0] + a[-1])))

    @property
    def total_variation(self):
        return self.total_variation_between()

    def sup_diff(self, other):
        return float(np.max(np.abs(self.s_values - other.s_values)))

    @classmethod
    def constant(cls, t_grid, value):
        t_grid = np.asarray(t_grid, dtype=float)
        return cls(t_grid, np.full(t_grid.size, float(value)), np.zeros(t_grid.size), "exact")

    @classmethod
    def ramp(cls, t_grid, start, end):
        t_grid = np.asarray(t_grid, dtype=float)
        span = t_grid[-1] - t_grid[0]
        slope = (end - start) / span
        return cls(t_grid, start + slope * (t_grid - t_grid[0]), np.full(t_grid.size, slope), "exact")

    @classmethod
    def from_function(cls, t_grid, s, sprime):
        t_grid = np.asarray(t_grid, dtype=float)
        return cls(t_grid, np.asarray(s(t_grid), dtype=float),
                   np.asarray(sprime(t_grid), dtype=float), "exact")

    def reversed_time(self):
        """Same path in the variable t -> -t, ordered from t = 0."""
        return NonlocalTrajectory(-self.t_grid, self.s_values, -self.sprime_values, self.sprime_method)


@dataclass(eq=False)
class SolutionRecord:
    fields: dict
    trajectory: NonlocalTrajectory
    convergence: list = field(default_factory=list)
    class_report: dict = field(default_factory=dict)
    method: str = "direct"
    history: np.ndarray = None  # (K+1, Q, R, m) when kept
    info: dict = field(default_factory=dict)

    def field_at(self, t):
        key = min(self.fields, key=lambda k: abs(k - t))
        if abs(key - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return self.fields[key]


def spectral_values(data, grid, m=None):
    """Samples ``(Q, R, m)`` from a DataFamily, SpectralField or array."""
    if isinstance(data, DataFamily):
        vals = data.on_grid(grid)
    elif isinstance(data, SpectralField):
        vals = data.values
    else:
        vals = np.asarray(data, dtype=complex)
    if vals.shape[:2] != grid.shape:
        raise ValueError(f"data of shape {vals.shape} do not match grid {grid.shape}")
    if m is not None and vals.shape[2] != m:
        raise ValueError(f"data have {vals.shape[2]} components, system has {m}")
    return np.array(vals, dtype=complex)


def time_grid(T, dt):
    K = int(round(abs(T / dt)))
    if K < 1 or abs(K * abs(dt) - abs(T)) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"horizon T={T} is not a whole number of steps dt={dt}")
    return np.sign(dt) * abs(dt) * np.arange(K + 1)


def _check_range(s, delta, where):
    if s > delta or s < 0:
        raise ParameterRangeError(
            f"parameter range exceeded (s={s:.6g} outside [0, {delta:g}]) at {where}; "
            "the smallness hypothesis is violated"
        )


def cfl_number(problem, grid, dt, s_values=(0.0,)):
    s = np.clip(np.asarray(list(s_values) + [problem.symbol.delta], dtype=float), 0, problem.symbol.delta)
    roots = characteristic_roots(problem.symbol, s[:, None], grid.sphere_nodes[None],
                                 check_gap=False, with_derivative=False).roots
    return abs(dt) * grid.rho_max * float(np.abs(roots).max())


def _warn_cfl(problem, grid, dt, s0, limit=CFL_LIMIT):
    c = cfl_number(problem, grid, dt, (s0,))
    if c > limit:
        warnings.warn(f"dt * rho_max * sup|phi| = {c:.3g} exceeds {limit:g}", StabilityWarning,
                      stacklevel=3)
    return c


def _snapshot_indices(t_grid, snapshots):
    out = {}
    for t in snapshots or ():
        k = int(np.argmin(np.abs(t_grid - t)))
        if abs(t_grid[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"snapshot time {t} is not on the time grid")
        out[float(t_grid[k])] = k
    return out


def _direct_one_sided(problem, V0, grid, T, dt, keep_history, where):
    model, weight = problem.symbol, problem.weight
    omega = grid.sphere_nodes
    rho = grid.rho_nodes[:, None]
    t_grid = time_grid(T, dt)
    K = t_grid.size - 1

    def step_rhs(V, stage):
        s = float(nonlocal_value(grid, weight, V))
        _check_range(s, model.delta, f"{where} stage {stage}")
        A = model(s, omega)
        return 1j * rho * (A[:, None] @ V[..., None])[..., 0], s, A

    s_vals = np.empty(K + 1)
    sp_vals = np.empty(K + 1)
    energy = np.empty(K + 1)
    comps = np.empty((K + 1, V0.shape[-1]))
    hist = np.empty((K + 1,) + V0.shape, dtype=complex) if keep_history else None
    V = V0.copy()
    k1, s, A = step_rhs(V, "t=0")
    for k in range(K + 1):
        s_vals[k] = s
        sp_vals[k] = float(nonlocal_rate(grid, weight, V, A))
        comps[k] = component_l2_sq(grid, V)
        energy[k] = comps[k].sum()
        if keep_history:
            hist[k] = V
        if k == K:
            break
        tk = f"t={t_grid[k]:.6g}"
        k2, _, _ = step_rhs(V + 0.5 * dt * k1, tk)
        k3, _, _ = step_rhs(V + 0.5 * dt * k2, tk)
        k4, _, _ = step_rhs(V + dt * k3, tk)
        V = V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k1, s, A = step_rhs(V, f"t={t_grid[k + 1]:.6g}")
    return t_grid, s_vals, sp_vals, energy, comps, hist, V


def _stitch(back, fwd):
    """Join a backward run (t = 0, -dt, ...) and a forward run at t = 0."""
    return np.concatenate([back[::-1], fwd[1:]], axis=0)


def direct_solve(problem, data, grid, T, dt, snapshots=None, two_sided=False, keep_history=False,
                 cfl_limit=CFL_LIMIT):
    """RK4 on the full spectral state with s re-evaluated at every stage.

    Returns a SolutionRecord whose trajectory carries s(t) and the analytic
    s'(t); ``info`` holds the squared L^2 norm and the per-component norms at
    every step.
    """
    V0 = spectral_values(data, grid, problem.m)
    s0 = float(nonlocal_value(grid, problem.weight, V0))
    _check_range(s0, problem.symbol.delta, "t=0")
    cfl = _warn_cfl(problem, grid, dt, s0, cfl_limit)
    store = keep_history or bool(snapshots)
    fwd = _direct_one_sided(problem, V0, grid, T, abs(dt), store, "forward run")
    t_grid, s, sp, energy, comps, hist, _ = fwd
    if two_sided:
        back = _direct_one_sided(problem, V0, grid, T, -abs(dt), store, "backward run")
        t_grid = _stitch(back[0], fwd[0])
        s, sp, energy, comps = (_stitch(b, f) for b, f in zip(back[1:5], fwd[1:5]))
        hist = _stitch(back[5], fwd[5]) if store else None
    traj = NonlocalTrajectory(t_grid, s, sp, "analytic")
    snaps = _snapshot_indices(t_grid, snapshots)
    fields = {t: SpectralField(hist[k].copy(), grid, t) for t, k in snaps.items()}
    rec = SolutionRecord(fields, traj, method="direct", history=hist if keep_history else None,
                         info=dict(l2_energy=energy, component_l2=comps, cfl=cfl))
    rec.class_report = realized_class(problem, grid, traj)
    return rec


def realized_class(problem, grid, traj):
    """(Lambda, K) of the coefficient path t -> A(s(t), .).

    Lambda = sup_t max_omega ||A||_2 and K = int max_omega ||dA/ds s'||_2 dt
    (trapezoid), next to the chain-rule bound lip_bound * int |s'| dt.
    """
    model = problem.symbol
    s = np.clip(traj.s_values, 0.0, model.delta)[:, None]
    omega = grid.sphere_nodes[None]
    A = model(s, omega)
    lam = float(np.linalg.norm(A, 2, axis=(-2, -1)).max())
    if model.depends_on_s:
        dA = np.linalg.norm(model.ds(s, omega), 2, axis=(-2, -1)).max(axis=-1)
    else:
        dA = np.zeros(s.shape[0])
    rate = dA * np.abs(traj.sprime_values)
    K = float(abs(traj.dt) * (np.sum(rate) - 0.5 * (rate[0] + rate[-1]))) if rate.size > 1 else 0.0
    return dict(Lambda=lam, K=K, K_bound=model.lip_bound * traj.total_variation,
                total_variation=traj.total_variation)


@dataclass(eq=False)
class ThetaResult:
    trajectory: NonlocalTrajectory
    history: np.ndarray  # (K+1, Q, R, m)
    realized: dict
    tables: object = None
    amplitudes: object = None


def _theta_one_sided(problem, V0, s_in, grid, method, amp_method, backend):
    model, weight = problem.symbol, problem.weight
    if np.any(s_in.s_values < 0) or np.any(s_in.s_values > model.delta):
        bad = float(s_in.s_values[np.argmax(np.abs(s_in.s_values - 0.5 * model.delta))])
        raise ParameterRangeError(f"input coefficient path leaves [0, {model.delta:g}] (s={bad:.6g})")
    t, s, sp = s_in.t_grid, s_in.s_values, s_in.sprime_values
    tables = amps = None
    if method == "asymptotic":
        tables = asymp.build_tables(model, grid, t, s, sp)
        Y0 = (tables.N(0)[:, None] @ V0[..., None])  # (Q, R, m, 1)
        amps = asymp.integrate_amplitudes(tables, Y0, method=amp_method, backend=backend)
        hist = asymp.evaluate_representation(tables, amps)
    elif method == "modes":
        coef = asymp.coefficient_path(t, s, sp)
        hist = asymp.mode_solve(model, grid, coef, V0, backend=backend)
    else:
        raise ValueError(f"unknown linear solver {method!r}")
    A = model(s[:, None], grid.sphere_nodes[None])
    s_out = nonlocal_value(grid, weight, hist)
    sp_out = nonlocal_rate(grid, weight, hist, A)
    return NonlocalTrajectory(t, s_out, sp_out, "analytic"), hist, tables, amps


def theta_apply(problem, data, s_in, grid, method="asymptotic", amp_method="rk4", backend=None):
    """One application of Theta to the coefficient path ``s_in``.

    ``s_in.t_grid`` may run forward from 0, backward from 0, or over a
    symmetric window [-T, T] (then the two halves are solved from t = 0).
    """
    V0 = spectral_values(data, grid, problem.m)
    t = s_in.t_grid
    if t[0] < 0 < t[-1]:
        i0 = int(np.argmin(np.abs(t)))
        fwd_in = NonlocalTrajectory(t[i0:], s_in.s_values[i0:], s_in.sprime_values[i0:])
        back_in = NonlocalTrajectory(t[:i0 + 1][::-1], s_in.s_values[:i0 + 1][::-1],
                                     s_in.sprime_values[:i0 + 1][::-1])
        f = _theta_one_sided(problem, V0, fwd_in, grid, method, amp_method, backend)
        b = _theta_one_sided(problem, V0, back_in, grid, method, amp_method, backend)
        traj = NonlocalTrajectory(t, _stitch(b[0].s_values, f[0].s_values),
                                  _stitch(b[0].sprime_values, f[0].sprime_values), "analytic")
        hist = _stitch(b[1], f[1])
        return ThetaResult(traj, hist, realized_class(problem, grid, s_in), None, None)
    traj, hist, tables, amps = _theta_one_sided(problem, V0, s_in, grid, method, amp_method, backend)
    return ThetaResult(traj, hist, realized_class(problem, grid, s_in), tables, amps)


def _lipschitz_ratio(grid, weight, prev, cur, u0_norm):
    """sup_t |s_U - s_V| / (||U0|| ||U - V||) against ||S|| (sup||U|| + sup||V||) / ||U0||."""
    if u0_norm == 0:
        return None
    diff = np.sqrt(l2_sq(grid, prev.history - cur.history))
    ds = np.abs(prev.trajectory.s_values - cur.trajectory.s_values)
    mask = diff > 1e-13 * u0_norm
    if not np.any(mask):
        return None
    measured = float(np.max(ds[mask] / (u0_norm * diff[mask])))
    bound = weight.norm * (np.sqrt(l2_sq(grid, prev.history)).max()
                           + np.sqrt(l2_sq(grid, cur.history)).max()) / u0_norm
    return dict(measured=measured, bound=float(bound))


def fixed_point_solve(problem, data, grid, T, dt, tol=FP_TOL, max_iters=MAX_ITERS, seed=None,
                      method="asymptotic", amp_method="rk4", snapshots=None, two_sided=False,
                      keep_history=False, backend=None):
    """Iterate s_{k+1} = Theta(s_k) until sup_t |s_{k+1} - s_k| < tol.

    The default seed is the constant path s(0).  Raises ConvergenceError when
    ``max_iters`` is hit, when the deltas grow for DIVERGENCE_PATIENCE
    consecutive iterations, or when an iterate leaves [0, delta].
    """
    V0 = spectral_values(data, grid, problem.m)
    s0 = float(nonlocal_value(grid, problem.weight, V0))
    _check_range(s0, problem.symbol.delta, "t=0")
    fwd_t = time_grid(T, abs(dt))
    t_grid = _stitch(-fwd_t, fwd_t) if two_sided else fwd_t
    if seed is None:
        seed = NonlocalTrajectory.constant(t_grid, s0)
    if seed.t_grid.shape != t_grid.shape or np.max(np.abs(seed.t_grid - t_grid)) > 1e-12:
        raise ValueError("seed trajectory must live on the solver time grid")
    u0_norm = float(np.sqrt(l2_sq(grid, V0)))
    current = seed
    deltas, lip, realized = [], [], []
    prev = None
    grow = 0
    for it in range(1, max_iters + 1):
        try:
            res = theta_apply(problem, V0, current, grid, method, amp_method, backend)
        except ParameterRangeError as exc:
            err = ConvergenceError(f"no contraction: iterate {it} left the admissible range ({exc})")
            err.deltas = deltas
            raise err from exc
        realized.append(res.realized)
        delta = res.trajectory.sup_diff(current)
        deltas.append(delta)
        if prev is not None:
            r = _lipschitz_ratio(grid, problem.weight, prev, res, u0_norm)
            if r is not None:
                lip.append(r)
        grow = grow + 1 if len(deltas) > 1 and delta > deltas[-2] else 0
        prev = res
        current = res.trajectory
        if delta < tol:
            break
        if grow >= DIVERGENCE_PATIENCE:
            err = ConvergenceError(
                f"no contraction: data too large or delta too small "
                f"(sup-difference grew for {grow} iterations, last {delta:.3e})")
            err.deltas = deltas
            raise err
    else:
        err = ConvergenceError(
            f"no contraction: data too large or delta too small "
            f"({max_iters} iterations, last sup-difference {deltas[-1]:.3e})")
        err.deltas = deltas
        raise err

    # ratios of successive deltas, ignoring those at the rounding floor
    floor = 100 * np.finfo(float).eps * max(float(np.abs(current.s_values).max()), 1e-300)
    ratios = [deltas[i + 1] / deltas[i] for i in range(len(deltas) - 1)
              if deltas[i + 1] > floor]
    hist = prev.history
    snaps = _snapshot_indices(t_grid, snapshots)
    fields = {t: SpectralField(hist[k], grid, t) for t, k in snaps.items()}
    rec = SolutionRecord(fields, current, method="fixed_point",
                         history=hist if keep_history else None)
    rec.convergence = deltas
    rec.info = dict(iterations=len(deltas), contraction=ratios,
                    contraction_factor=max(ratios) if ratios else 0.0,
                    lipschitz=lip, realized_per_iteration=realized,
                    l2_energy=l2_sq(grid, hist), theta=prev)
    rec.class_report = realized_class(problem, grid, current)
    return rec


def random_trajectory(t_grid, center, amplitude, rng, n_waves=3):
    """Smooth path center + amplitude * (normalised sum of sines), with exact s'."""
    t_grid = np.asarray(t_grid, dtype=float)
    freq = rng.uniform(0.2, 2.0, n_waves)
    phase = rng.uniform(0, 2 * np.pi, n_waves)
    coef = rng.uniform(-1, 1, n_waves)
    coef /= np.abs(coef).sum()
    arg = freq[:, None] * t_grid[None, :] + phase[:, None]
    s = center + amplitude * (coef[:, None] * np.sin(arg)).sum(axis=0)
    sp = amplitude * (coef[:, None] * freq[:, None] * np.cos(arg)).sum(axis=0)
    return NonlocalTrajectory(t_grid, s, sp, "exact")


def contraction_probe(problem, data, grid, T, dt, n_pairs=4, seed=0, spread=None,
                      method="asymptotic", backend=None):
    """max ||Theta(s1) - Theta(s2)||_inf / ||s1 - s2||_inf over random pairs."""
    V0 = spectral_values(data, grid, problem.m)
    s0 = float(nonlocal_value(grid, problem.weight, V0))
    delta = problem.symbol.delta
    spread = spread if spread is not None else 0.25 * min(max(s0, 1e-3), delta)
    center = min(max(s0, spread), delta - spread)
    t_grid = time_grid(T, abs(dt))
    rng = np.random.default_rng(seed)
    q = []
    for _ in range(n_pairs):
        a = random_trajectory(t_grid, center, spread, rng)
        b = random_trajectory(t_grid, center, spread, rng)
        ta = theta_apply(problem, V0, a, grid, method, backend=backend).trajectory
        tb = theta_apply(problem, V0, b, grid, method, backend=backend).trajectory
        den = a.sup_diff(b)
        if den > 0:
            q.append(ta.sup_diff(tb) / den)
    return dict(q=max(q) if q else 0.0, samples=q)


def uniqueness_probe(problem, data, grid, T, dt, tol=FP_TOL, seeds=("constant", "ramp", "direct"),
                     max_iters=MAX_ITERS, method="asymptotic", backend=None):
    """Converge the fixed-point iteration from several seeds and compare them.

    Returns the max pairwise sup-difference of the converged s(t), the
    per-branch status and the measured Lipschitz ratio of s along iterates.
    """
    V0 = spectral_values(data, grid, problem.m)
    s0 = float(nonlocal_value(grid, problem.weight, V0))
    delta = problem.symbol.delta
    t_grid = time_grid(T, abs(dt))
    starts = {}
    for name in seeds:
        if name == "constant":
            starts[name] = NonlocalTrajectory.constant(t_grid, s0)
        elif name == "ramp":
            starts[name] = NonlocalTrajectory.ramp(t_grid, s0, 0.5 * (s0 + delta))
        elif name == "direct":
            starts[name] = direct_solve(problem, V0, grid, T, abs(dt)).trajectory
        else:
            raise ValueError(f"unknown seed {name!r}")
    branches, finals, lips = {}, {}, []
    for name, start in starts.items():
        try:
            rec = fixed_point_solve(problem, V0, grid, T, dt, tol, max_iters, seed=start,
                                    method=method, backend=backend)
        except ConvergenceError as exc:
            branches[name] = dict(converged=False, error=str(exc))
            continue
        branches[name] = dict(converged=True, iterations=rec.info["iterations"])
        finals[name] = rec.trajectory
        lips.extend(rec.info["lipschitz"])
    names = list(finals)
    diffs = [finals[a].sup_diff(finals[b]) for i, a in enumerate(names) for b in names[i + 1:]]
    return dict(max_pairwise=max(diffs) if diffs else 0.0, branches=branches,
                all_converged=all(b["converged"] for b in branches.values()),
                lipschitz=dict(measured=max((l["measured"] for l in lips), default=0.0),
                               bound=max((l["bound"] for l in lips), default=0.0)))
