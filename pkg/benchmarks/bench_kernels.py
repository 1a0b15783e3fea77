"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--draws N] [--repeats K]

Times the two hot loops in isolation (the adaptive master-equation stepper
and the per-draw scan evaluation) plus the user-facing operations built on
them, on every importable backend.
"""

import argparse
import time

import numpy as np

from nesstur._core import available_backends
from nesstur.model import (
    SystemParams,
    dissipative_generator,
    energy_eigensystem,
    liouvillian_gap,
    ness_analytic,
    ness_density_matrix,
)
from nesstur.workstats import ginibre_batch, unitary_max_work

RELAX = SystemParams(1.0, 0.75, 3.0, 1.0, 0.004, 0.004)
SCAN = SystemParams(1.0, 0.5, 3.0, 1.0, 0.012, 0.004)


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_integrator(impl, repeats: int) -> float:
    gen = dissipative_generator(RELAX)
    u = unitary_max_work(RELAX)
    rho0 = u @ ness_density_matrix(RELAX) @ u.conj().T
    y0 = ((rho0 + rho0.conj().T) / 2).reshape(-1)
    t_end = 25.0 / liouvillian_gap(RELAX)
    t_eval = np.linspace(0.0, t_end, 2000)

    def run():
        impl.integrate_rk45(gen, y0, t_end, 1e-11, 1e-15, max_step=t_end / 2000, t_eval=t_eval, herm_dim=4)

    return best_of(run, repeats)


def bench_scan_kernel(impl, gin, repeats: int) -> float:
    ees = energy_eigensystem(SCAN)
    pops = ness_analytic(SCAN).as_array()

    def run():
        impl.tur_scan_records(gin, ees.vectors, ees.energies, pops, 1e-10)

    return best_of(run, repeats)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--draws", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {', '.join(sorted(backends))}")
    print(f"scan draws: {args.draws}, best of {args.repeats}\n")

    t0 = time.perf_counter()
    gin = ginibre_batch(12345, args.draws)
    print(f"seeded Ginibre batch generation (shared by both): {time.perf_counter() - t0:.3f}s\n")

    rows = []
    for name in sorted(backends):
        impl = backends[name]
        t_int = bench_integrator(impl, args.repeats)
        t_scan = bench_scan_kernel(impl, gin, args.repeats)
        rows.append((name, t_int, t_scan))

    print(f"{'backend':<10} {'rk45 relaxation [s]':>20} {'scan kernel [s]':>18} {'draws/s':>12}")
    for name, t_int, t_scan in rows:
        print(f"{name:<10} {t_int:>20.4f} {t_scan:>18.4f} {args.draws / t_scan:>12.0f}")

    if len(rows) == 2:
        by_name = {r[0]: r for r in rows}
        f, n = by_name["fallback"], by_name["native"]
        print(
            f"\nspeedup native vs fallback: "
            f"integrator x{f[1] / n[1]:.1f}, scan x{f[2] / n[2]:.1f}"
        )


if __name__ == "__main__":
    main()
