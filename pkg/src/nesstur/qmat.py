"""Dense complex matrix kernel and quantum-information primitives.

All operators are plain ``numpy`` arrays of ``complex128``.  Functions are
written for generic dimension where that is free, but the two-qubit case
(dimension 4 with a fixed 2x2 bipartition) is the only one exercised by the
rest of the package; partial trace and partial transposition are hardcoded
to that bipartition.

Entropies are in nats throughout.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import SupportViolationError

# Density-matrix validity tolerances.
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
# Eigenvalues at or below this cutoff are treated as exactly zero in
# entropies (0 ln 0 = 0).
ENTROPY_EIG_CUTOFF = 1e-14
# Support test for the relative entropy: sigma eigenvalues at or below this
# cutoff must carry rho weight at or below the same cutoff.
SUPPORT_CUTOFF = 1e-12


class HermitianEig(NamedTuple):
    """Eigendecomposition of a Hermitian matrix.

    ``eigenvalues`` are real and ascending, ``eigenvectors`` holds the
    orthonormal eigenvectors as columns, so that
    ``eigenvectors @ diag(eigenvalues) @ eigenvectors.conj().T``
    reconstructs the input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def check_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a square complex array with finite entries."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def hermiticity_defect(m) -> float:
    """Largest entrywise deviation from Hermiticity, max |m - m^dag|."""
    m = np.asarray(m, dtype=complex)
    return float(np.abs(m - m.conj().T).max())


def unitarity_defect(u) -> float:
    """Frobenius norm of u^dag u - 1."""
    u = np.asarray(u, dtype=complex)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def check_density_matrix(rho, name: str = "rho") -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive.

    Tolerances are the package-wide constants ``HERMITICITY_TOL``,
    ``TRACE_TOL`` and ``POSITIVITY_TOL``.  Returns the coerced array.
    """
    rho = check_matrix(rho, name)
    defect = hermiticity_defect(rho)
    if defect > HERMITICITY_TOL:
        raise ValueError(f"{name} is not Hermitian (defect {defect:.3e})")
    tr = rho.trace()
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{name} has trace {tr}, expected 1")
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if min_eig < -POSITIVITY_TOL:
        raise ValueError(f"{name} is not positive (min eigenvalue {min_eig:.3e})")
    return rho


def hermitian_eig(m, herm_tol: float = 1e-10) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises ``ValueError`` if the input is not Hermitian within ``herm_tol``
    (entrywise).  Non-convergence of the underlying solver propagates as
    ``numpy.linalg.LinAlgError``.
    """
    m = check_matrix(m)
    defect = hermiticity_defect(m)
    if defect > herm_tol:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")
    w, v = np.linalg.eigh(m)
    return HermitianEig(w, v)


def partial_trace(rho, keep: str) -> np.ndarray:
    """Reduced state of one qubit of a 4x4 two-qubit density matrix.

    Parameters
    ----------
    rho : array_like
        4x4 density matrix in the product basis (|00>,|01>,|10>,|11>).
    keep : {"first", "second"}
        Which tensor factor to keep; the other one is traced out.
    """
    rho = check_density_matrix(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"partial trace expects a 4x4 matrix, got {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)
    if keep == "first":
        return np.einsum("iaja->ij", r)
    if keep == "second":
        return np.einsum("iaib->ab", r)
    raise ValueError(f"keep must be 'first' or 'second', got {keep!r}")


def partial_transpose(m) -> np.ndarray:
    """Transpose on the second factor of a 4x4 two-qubit operator.

    Pure entry permutation: involutive, trace-, Hermiticity- and
    Frobenius-norm-preserving.
    """
    m = check_matrix(m)
    if m.shape != (4, 4):
        raise ValueError(f"partial transpose expects a 4x4 matrix, got {m.shape}")
    return m.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def _entropy_from_eigenvalues(w: np.ndarray) -> float:
    w = w[w > ENTROPY_EIG_CUTOFF]
    return float(max(0.0, -np.sum(w * np.log(w))))


def von_neumann_entropy(rho, check: bool = True) -> float:
    """Von Neumann entropy -Tr[rho ln rho] in nats.

    Eigenvalues at or below ``ENTROPY_EIG_CUTOFF`` contribute zero.
    """
    if check:
        rho = check_density_matrix(rho)
    return _entropy_from_eigenvalues(np.linalg.eigvalsh(rho))


def quantum_relative_entropy(rho, sigma, check: bool = True) -> float:
    """Quantum relative entropy S(rho || sigma) = Tr[rho(ln rho - ln sigma)].

    Requires support(rho) within support(sigma): any sigma eigenvalue at or
    below ``SUPPORT_CUTOFF`` may carry at most ``SUPPORT_CUTOFF`` of rho
    weight along its eigenvector, otherwise the divergence is infinite and
    ``SupportViolationError`` is raised.
    """
    if check:
        rho = check_density_matrix(rho, "rho")
        sigma = check_density_matrix(sigma, "sigma")
    p, u = np.linalg.eigh(rho)
    q, v = np.linalg.eigh(sigma)
    p = np.clip(p, 0.0, None)
    # overlap[i, j] = |<u_i|v_j>|^2
    overlap = np.abs(u.conj().T @ v) ** 2
    weight_on_sigma_modes = p @ overlap
    dead = q <= SUPPORT_CUTOFF
    if np.any(weight_on_sigma_modes[dead] > SUPPORT_CUTOFF):
        raise SupportViolationError(
            "rho has weight outside the support of sigma; S(rho||sigma) is infinite"
        )
    live_p = p > ENTROPY_EIG_CUTOFF
    live_q = ~dead
    term_rho = float(np.sum(p[live_p] * np.log(p[live_p])))
    term_cross = float(
        np.sum((p[:, None] * overlap)[:, live_q] * np.log(q[live_q])[None, :])
    )
    return max(0.0, term_rho - term_cross)


def purity(rho, check: bool = True) -> float:
    """Tr(rho^2); ranges from 1/dim (maximally mixed) to 1 (pure)."""
    if check:
        rho = check_density_matrix(rho)
    return float(np.vdot(rho, rho).real)


def frobenius_distance(a, b) -> float:
    """Frobenius (Hilbert-Schmidt) distance sqrt(sum |a_ij - b_ij|^2)."""
    a = check_matrix(a, "a")
    b = check_matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))
