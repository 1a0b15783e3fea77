"""Two-point-measurement work statistics and the quench unitaries.

The work distribution of a fast unitary quench is built from projective
energy measurements before and after the quench.  The first measurement
dephases the state in the energy eigenbasis, so only its energy-diagonal
weights enter; steady states of this model are already diagonal there.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import qmat
from .model import SystemParams, energy_eigensystem, ness_density_matrix

UNITARY_TOL = 1e-10
# Atoms closer than this (relative to omega) merge; below this weight an
# atom is numerically zero and dropped.
MERGE_TOL_FACTOR = 1e-9
PROB_FLOOR = 1e-30


@dataclass(frozen=True)
class WorkDistribution:
    """Discrete work distribution: atoms (w, prob) with w strictly ascending."""

    w: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        if self.w.shape != self.prob.shape or self.w.ndim != 1:
            raise ValueError("w and prob must be 1-d arrays of equal length")
        if np.any(self.prob < -1e-15):
            raise ValueError("negative probability atom")
        if abs(self.prob.sum() - 1.0) > 1e-12:
            raise ValueError(f"atom probabilities sum to {self.prob.sum()!r}, not 1")
        if np.any(np.diff(self.w) <= 0):
            raise ValueError("work values must be strictly ascending")

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.w.tolist(), self.prob.tolist()))

    def to_csv(self, path_or_buf) -> None:
        buf = io.StringIO()
        buf.write("w,prob\n")
        for w, pr in zip(self.w, self.prob):
            buf.write(f"{w:.17g},{pr:.17g}\n")
        text = buf.getvalue()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)


@dataclass(frozen=True)
class WorkMoments:
    """First two moments of a work distribution.

    ``rel_err_sq`` is Var(W)/<W>^2, or None when |<W>| <= 1e-12 (undefined).
    """

    mean: float
    second: float
    variance: float
    rel_err_sq: float | None


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    u = qmat.check_matrix(u, "u")
    defect = qmat.unitarity_defect(u)
    if defect > tol:
        raise ValueError(f"operator is not unitary (defect {defect:.3e})")
    return u


def dephase_in_energy_basis(p: SystemParams, rho) -> np.ndarray:
    """Project a state onto its energy-diagonal part (drops coherences)."""
    ees = energy_eigensystem(p)
    pops = np.real(np.einsum("ij,jk,ki->i", ees.vectors.conj().T, rho, ees.vectors))
    return (ees.vectors * pops) @ ees.vectors.conj().T


def energy_populations(p: SystemParams, rho) -> np.ndarray:
    """Diagonal weights of a state in the energy eigenbasis."""
    rho = np.asarray(rho, dtype=complex)
    ees = energy_eigensystem(p)
    return np.real(np.einsum("ij,jk,ki->i", ees.vectors.conj().T, rho, ees.vectors))


def tpm_distribution(p: SystemParams, state, u, merge_tol: float | None = None) -> WorkDistribution:
    """Two-point-measurement work distribution of a unitary quench.

    P(W) collects p_n |<m|U|n>|^2 at W = eps_m - eps_n, where p_n are the
    energy-diagonal weights of ``state`` (non-diagonal states are dephased
    by the first measurement).  Atoms closer than ``merge_tol`` (default
    1e-9 * omega) merge by probability-weighted average.
    """
    u = check_unitary(u)
    state = qmat.check_density_matrix(state, "state")
    if merge_tol is None:
        merge_tol = MERGE_TOL_FACTOR * p.omega
    ees = energy_eigensystem(p)
    pops = energy_populations(p, state)
    u_eig = ees.vectors.conj().T @ u @ ees.vectors
    t_mn = np.abs(u_eig) ** 2
    w_vals = (ees.energies[:, None] - ees.energies[None, :]).ravel()
    p_vals = (t_mn * pops[None, :]).ravel()
    keep = p_vals > PROB_FLOOR
    w_vals, p_vals = w_vals[keep], p_vals[keep]
    order = np.argsort(w_vals)
    w_vals, p_vals = w_vals[order], p_vals[order]

    merged_w: list[float] = []
    merged_p: list[float] = []
    for w, pr in zip(w_vals, p_vals):
        if merged_w and w - merged_w[-1] <= merge_tol:
            tot = merged_p[-1] + pr
            merged_w[-1] = (merged_w[-1] * merged_p[-1] + w * pr) / tot
            merged_p[-1] = tot
        else:
            merged_w.append(w)
            merged_p.append(pr)
    return WorkDistribution(np.array(merged_w), np.array(merged_p))


def work_moments(d: WorkDistribution) -> WorkMoments:
    """Mean, second moment and variance by direct summation over atoms."""
    mean = float(d.prob @ d.w)
    second = float(d.prob @ d.w**2)
    variance = second - mean**2
    rel = variance / mean**2 if abs(mean) > 1e-12 else None
    return WorkMoments(mean, second, variance, rel)


def unitary_swap_entangled(p: SystemParams) -> np.ndarray:
    """Involution swapping the two entangled eigenstates, identity elsewhere.

    Conjugating the eigenbasis permutation back to the computational basis
    collapses to an exact diagonal sign matrix, so the involution holds to
    the last bit.
    """
    return np.diag([1.0, 1.0, -1.0, 1.0]).astype(complex)


def unitary_max_work(p: SystemParams) -> np.ndarray:
    """Population-reversing involution: swaps ground/top and the entangled pair.

    Among all permutations of the energy eigenbasis this injects the most
    average work into a passive state.
    """
    u = np.diag([0.0, 1.0, -1.0, 0.0]).astype(complex)
    u[0, 3] = 1.0
    u[3, 0] = 1.0
    return u


# Hand-picked bound-breaking quench, tabulated to 6 decimals in the basis
# (|11>,|10>,|01>,|00>); re-indexed below to (|00>,|01>,|10>,|11>).
_VIOLATION_TABLE = np.array(
    [
        [0.61214 - 0.084476j, 0.442141 - 0.20187j, 0.197476 - 0.549142j, 0.166498 - 0.116762j],
        [-0.000772 - 0.210944j, 0.125315 + 0.662622j, -0.440385 - 0.240318j, 0.347386 + 0.358276j],
        [0.250147 - 0.159182j, 0.198848 + 0.471307j, -0.095917 + 0.135918j, -0.678087 - 0.40366j],
        [-0.691565 + 0.086468j, 0.190366 + 0.105252j, 0.175807 - 0.590908j, -0.133258 - 0.262879j],
    ]
)

VIOLATION_UNITARY_RAW = _VIOLATION_TABLE[::-1, ::-1].copy()
VIOLATION_UNITARY_RAW.flags.writeable = False


def unitary_violation() -> np.ndarray:
    """The tabulated bound-breaking quench, re-unitarized.

    The 6-decimal rounding leaves a unitarity defect of order 1e-6 which
    would leak into probability normalization, so the nearest unitary
    (polar factor) is returned.
    """
    w, _, vh = np.linalg.svd(VIOLATION_UNITARY_RAW)
    return w @ vh


def haar_random_unitary(rng_seed: int, dim: int = 4) -> np.ndarray:
    """Haar-distributed random unitary, deterministic in the seed.

    Ginibre draw, QR, then the diagonal phases of R are absorbed into Q so
    the distribution is exactly Haar.
    """
    rng = np.random.default_rng(rng_seed)
    x = rng.standard_normal((dim, dim))
    y = rng.standard_normal((dim, dim))
    a = (x + 1j * y) / np.sqrt(2.0)
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def ginibre_batch(base_seed: int, n: int, dim: int = 4) -> np.ndarray:
    """The Ginibre samples behind draws base_seed .. base_seed+n-1.

    Draw i uses its own generator seeded base_seed + i, so scans can be
    partitioned across workers without changing the stream.
    """
    out = np.empty((n, dim, dim), dtype=complex)
    for i in range(n):
        rng = np.random.default_rng(base_seed + i)
        x = rng.standard_normal((dim, dim))
        y = rng.standard_normal((dim, dim))
        out[i] = (x + 1j * y) / np.sqrt(2.0)
    return out


def tpm_distribution_ness(p: SystemParams, u) -> WorkDistribution:
    """Work distribution of a quench applied to the steady state."""
    return tpm_distribution(p, ness_density_matrix(p), u)
