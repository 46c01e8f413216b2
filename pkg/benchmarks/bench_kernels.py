"""Time the compiled and pure-numpy RK4 kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--q 2] [--rho 128] [--steps 400] [--repeat 3]
"""
import argparse
import time

import numpy as np

from klab import kernels


def make_inputs(Q, R, m, K, seed=0):
    rng = np.random.default_rng(seed)
    H = 2 * K + 1
    X = 1e-2 * (rng.standard_normal((H, Q, m, m)) + 1j * rng.standard_normal((H, Q, m, m)))
    theta = np.cumsum(rng.uniform(0.5, 1.5, (H, Q, m)), axis=0) * 1e-3
    rho = np.linspace(0.05, 10.0, R)
    Y0 = rng.standard_normal((Q, R, m, 1)) + 0j
    A = rng.standard_normal((H, Q, m, m)) + 0j
    return X, theta, rho, Y0, A


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--rho", type=int, default=128)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    X, theta, rho, Y0, A = make_inputs(args.q, args.rho, args.m, args.steps)
    dt = 1e-3
    print(f"Q={args.q} R={args.rho} m={args.m} steps={args.steps}; backends: {kernels.available_backends()}")
    results = {}
    for name in kernels.available_backends():
        ta, a = best_of(lambda: kernels.rk4_amplitudes(X, theta, rho, Y0, dt, backend=name), args.repeat)
        tm, v = best_of(lambda: kernels.rk4_modes(A, rho, Y0, dt, backend=name), args.repeat)
        results[name] = (a, v)
        print(f"{name:>9}: rk4_amplitudes {ta * 1e3:8.2f} ms   rk4_modes {tm * 1e3:8.2f} ms")
    if len(results) == 2:
        da = np.abs(results["python"][0] - results["compiled"][0]).max()
        dv = np.abs(results["python"][1] - results["compiled"][1]).max()
        print(f"max difference between backends: amplitudes {da:.2e}, modes {dv:.2e}")


if __name__ == "__main__":
    main()
