"""Uncertainty bounds on the relative work error, and violation scans.

The exchange-scenario bounds lower-bound Var(W)/<W>^2 by a decreasing
function of an entropy budget: either f0(x) = 2/(e^x - 1) or the tighter
f(x) = 1/sinh^2(y) with y solving y tanh(y) = x/2.  Both entropy candidates
(relative entropy of the quenched state, and the integrated excess entropy
production) are evaluated; Haar scans use f0 of the relative entropy, which
needs no time integration.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass

import numpy as np

from . import _core
from .dynamics import sigma_cost
from .model import SystemParams, energy_eigensystem, ness_analytic
from .workstats import check_unitary, ginibre_batch

# A bound counts as violated only beyond this slack, to separate genuine
# violations from roundoff.
VIOLATION_SLACK = 1e-12
# Scan draws whose mean work is below this are excluded (undefined lhs).
SCAN_MEAN_CUTOFF = 1e-10

BOUND_KEYS = ("f0_rel", "f0_cost", "f_rel", "f_cost")


def bound_f0(x):
    """Looser exchange bound 2/(e^x - 1); strictly decreasing, positive."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bound_f0 requires a positive entropy argument")
    out = 2.0 / np.expm1(x)
    return float(out) if out.ndim == 0 else out


def _solve_y(x: float) -> float:
    """Unique positive root of y tanh(y) = x/2 (bisection, Newton polish)."""
    target = x / 2.0
    lo, hi = 1e-8, max(10.0, x)
    if lo * np.tanh(lo) < target:
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid * np.tanh(mid) < target:
                lo = mid
            else:
                hi = mid
        y = 0.5 * (lo + hi)
    else:
        # Target below the bracket floor: start from the small-y asymptote.
        y = np.sqrt(target)
    for _ in range(60):
        step = (y * np.tanh(y) - target) / (np.tanh(y) + y / np.cosh(y) ** 2)
        y -= step
        if abs(step) < 1e-12 * max(1.0, y):
            break
    return y


def bound_f(x):
    """Tightest saturable exchange bound, 1/sinh^2(y) at y tanh(y) = x/2.

    Satisfies f(x) >= f0(x) pointwise.
    """
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(arr <= 0):
        raise ValueError("bound_f requires a positive entropy argument")
    out = np.empty_like(arr)
    for i, xi in enumerate(arr):
        y = _solve_y(float(xi))
        out[i] = 4.0 * np.exp(-2.0 * y) if y > 350 else 1.0 / np.sinh(y) ** 2
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class TurReport:
    """One uncertainty-relation evaluation.

    lhs is the squared relative work error; ``bounds`` maps each of
    ``BOUND_KEYS`` to its value, ``violated`` flags lhs < bound - slack.
    """

    lhs: float
    sigma_rel: float
    sigma_cost: float
    bounds: dict[str, float]
    violated: dict[str, bool]


def evaluate_tur(p: SystemParams, u) -> TurReport:
    """Evaluate all four bounds for a unitary quench on the steady state."""
    lhs, srel = scan_record(p, u)
    if lhs is None:
        raise ValueError("mean work vanishes; relative error undefined")
    budget = sigma_cost(p, u)
    bounds = {
        "f0_rel": bound_f0(budget.sigma_rel),
        "f0_cost": bound_f0(budget.sigma_cost),
        "f_rel": bound_f(budget.sigma_rel),
        "f_cost": bound_f(budget.sigma_cost),
    }
    violated = {k: lhs < v - VIOLATION_SLACK for k, v in bounds.items()}
    return TurReport(lhs, budget.sigma_rel, budget.sigma_cost, bounds, violated)


def scan_record(p: SystemParams, u) -> tuple[float | None, float]:
    """(lhs, sigma_rel) of one quench, as evaluated inside the Haar scan.

    Returns lhs None when the mean work is below the scan cutoff.  Uses
    only the energy-diagonal data, so it needs no time integration.
    """
    u = check_unitary(u)
    ees = energy_eigensystem(p)
    pops = ness_analytic(p).as_array()
    u_eig = ees.vectors.conj().T @ u @ ees.vectors
    t_mn = np.abs(u_eig) ** 2
    q = t_mn @ pops
    mean = float(ees.energies @ (q - pops))
    d_e = ees.energies[:, None] - ees.energies[None, :]
    second = float(np.sum(t_mn * d_e**2 * pops[None, :]))
    log_pops = np.log(pops)
    srel = float(pops @ log_pops - q @ log_pops)
    if abs(mean) < SCAN_MEAN_CUTOFF:
        return None, srel
    return (second - mean**2) / mean**2, srel


def swap_tur_certificate(p: SystemParams) -> bool | None:
    """Closed-form check of the proven bound for the entangled-swap quench.

    Verifies (rho_- + rho_+)/(rho_- - rho_+)^2 - 1 >= 2/((rho_-/rho_+)^(rho_- - rho_+) - 1)
    directly from the steady-state populations.  Returns None when the two
    entangled populations coincide within 1e-12 (degenerate: the quench then
    does no average work and the relative error is undefined).
    """
    c = ness_analytic(p)
    rm, rp = c.rho_minus, c.rho_plus
    if abs(rm - rp) <= 1e-12:
        return None
    lhs = (rm + rp) / (rm - rp) ** 2 - 1.0
    rhs = 2.0 / np.expm1((rm - rp) * np.log(rm / rp))
    return bool(lhs >= rhs)


@dataclass(frozen=True)
class ScanResult:
    """Aggregate of a Haar-unitary violation scan.

    Per-record arrays cover the retained draws only; ``n_samples`` counts
    them, draws skipped for vanishing mean work are tallied separately.
    ``max_violation`` is the most negative gap = lhs - rhs.
    """

    n_total: int
    n_samples: int
    n_skipped_zero_mean: int
    lhs: np.ndarray
    rhs: np.ndarray
    gap: np.ndarray
    violation_fraction: float
    max_violation: float
    seed: int
    wall_seconds: float

    def to_csv(self, path_or_buf) -> None:
        buf = io.StringIO()
        buf.write("lhs,rhs,gap\n")
        for row in zip(self.lhs, self.rhs, self.gap):
            buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
        text = buf.getvalue()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)

    def summary(self) -> dict:
        return {
            "n": self.n_total,
            "n_skipped_zero_mean": self.n_skipped_zero_mean,
            "violation_fraction": self.violation_fraction,
            "max_violation": self.max_violation,
            "seed": self.seed,
            "wall_seconds": self.wall_seconds,
            "draws_per_second": self.n_total / self.wall_seconds
            if self.wall_seconds > 0
            else float("inf"),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def haar_violation_scan(p: SystemParams, n: int, base_seed: int) -> ScanResult:
    """Evaluate lhs vs f0(sigma_rel) over n Haar-random quenches.

    Draw i uses seed base_seed + i, so the result is deterministic in
    (base_seed, n) and independent of any work partitioning.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    start = time.perf_counter()
    ees = energy_eigensystem(p)
    pops = ness_analytic(p).as_array()
    gin = ginibre_batch(base_seed, n)
    lhs, srel, kept = _core.tur_scan_records(
        gin, ees.vectors, ees.energies, pops, SCAN_MEAN_CUTOFF
    )
    lhs = lhs[kept]
    rhs = bound_f0(srel[kept])
    gap = lhs - rhs
    n_samples = int(kept.sum())
    violations = int(np.count_nonzero(gap < 0))
    return ScanResult(
        n_total=n,
        n_samples=n_samples,
        n_skipped_zero_mean=n - n_samples,
        lhs=lhs,
        rhs=rhs,
        gap=gap,
        violation_fraction=violations / n_samples if n_samples else 0.0,
        max_violation=float(gap.min()) if n_samples else 0.0,
        seed=base_seed,
        wall_seconds=time.perf_counter() - start,
    )
