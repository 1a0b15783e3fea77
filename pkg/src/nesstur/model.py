"""Two resonant qubits with a flip-flop coupling, each weakly coupled to its
own bosonic bath.

Everything is expressed in the computational product basis ordered
(|00>, |01>, |10>, |11>); natural units (hbar = k_B = 1) throughout.  The
Hamiltonian eigenbasis is (|00>, (|01>-|10>)/sqrt2, (|01>+|10>)/sqrt2, |11>)
with energies (0, omega-g, omega+g, 2*omega), and all steady-state
population vectors in this module are ordered the same way.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DegenerateSteadyStateError

BATHS = ("c", "h")

# Unique-null-space requirements for the vectorized generator.
NULLSPACE_TOL = 1e-9
NULLSPACE_GAP_FACTOR = 10.0


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of the two-qubit machine.

    omega   : level spacing of both qubits (resonant), > 0
    g       : internal flip-flop coupling, 0 < g < omega
    beta_c  : inverse temperature of the colder bath
    beta_h  : inverse temperature of the hotter bath, 0 < beta_h <= beta_c
    nu_c/h  : dimensionless bath coupling strengths, > 0
    """

    omega: float
    g: float
    beta_c: float
    beta_h: float
    nu_c: float
    nu_h: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not 0 < self.g < self.omega:
            raise ValueError(
                f"g must lie in (0, omega) so both transition energies stay "
                f"positive, got g={self.g}, omega={self.omega}"
            )
        if not self.beta_h > 0:
            raise ValueError(f"beta_h must be positive, got {self.beta_h}")
        if not self.beta_c >= self.beta_h:
            raise ValueError(
                f"bath c must be the colder one (beta_c >= beta_h), got "
                f"beta_c={self.beta_c}, beta_h={self.beta_h}"
            )
        if not (self.nu_c > 0 and self.nu_h > 0):
            raise ValueError(
                f"bath couplings must be positive, got nu_c={self.nu_c}, "
                f"nu_h={self.nu_h}"
            )

    @property
    def transition_energies(self) -> tuple[float, float]:
        return (self.omega - self.g, self.omega + self.g)

    def bath(self, alpha: str) -> tuple[float, float]:
        """(nu, beta) of bath alpha in {'c', 'h'}."""
        if alpha == "c":
            return self.nu_c, self.beta_c
        if alpha == "h":
            return self.nu_h, self.beta_h
        raise ValueError(f"unknown bath {alpha!r}, expected 'c' or 'h'")


@dataclass(frozen=True)
class EnergyEigensystem:
    """Closed-form eigensystem: energies ascending, eigenvectors as columns."""

    energies: np.ndarray
    vectors: np.ndarray


class TransitionRates(NamedTuple):
    """Bath-induced rates at one transition energy.

    ``gamma`` is the absorption rate nu*eps/(e^(beta*eps)-1); ``gamma_bar``
    is the emission rate e^(beta*eps)*gamma.  They satisfy
    gamma_bar - gamma = nu*eps exactly.
    """

    gamma: float
    gamma_bar: float


@dataclass(frozen=True)
class NessCoefficients:
    """Steady-state populations in the energy eigenbasis.

    Ordered by energy: rho0 (ground), rho_minus (omega-g), rho_plus
    (omega+g), rho_2omega (top).  Must form a probability vector; the
    passivity ordering is *not* enforced here, use :func:`passivity_check`.
    """

    rho0: float
    rho_minus: float
    rho_plus: float
    rho_2omega: float

    def __post_init__(self):
        arr = self.as_array()
        if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
            raise ValueError(f"populations must lie in [0, 1], got {arr}")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValueError(f"populations must sum to 1, got {arr.sum()!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.rho0, self.rho_minus, self.rho_plus, self.rho_2omega])


@dataclass(frozen=True)
class JumpChannel:
    """One bath-induced transition: operator plus its two rates.

    ``op`` lowers the system energy by ``energy``; it enters the master
    equation twice, as gamma * D[op^dag] (absorption) and
    gamma_bar * D[op] (emission).
    """

    bath: str
    energy: float
    op: np.ndarray
    gamma: float
    gamma_bar: float


@dataclass(frozen=True)
class JumpOperatorSet:
    channels: tuple[JumpChannel, ...]

    def lindblad_terms(self) -> Iterator[tuple[float, np.ndarray]]:
        """The eight (rate, operator) dissipation channels."""
        for ch in self.channels:
            yield ch.gamma, ch.op.conj().T
            yield ch.gamma_bar, ch.op


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def build_hamiltonian(p: SystemParams) -> np.ndarray:
    """System Hamiltonian: local splittings omega plus flip-flop coupling g."""
    h = np.diag([0.0, p.omega, p.omega, 2 * p.omega]).astype(complex)
    h[1, 2] = p.g
    h[2, 1] = p.g
    return h


@functools.lru_cache(maxsize=None)
def energy_eigensystem(p: SystemParams) -> EnergyEigensystem:
    """Closed-form eigensystem of the Hamiltonian, energies ascending."""
    s = 1.0 / np.sqrt(2.0)
    energies = np.array([0.0, p.omega - p.g, p.omega + p.g, 2 * p.omega])
    vectors = np.array(
        [
            [1, 0, 0, 0],
            [0, s, s, 0],
            [0, -s, s, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )
    return EnergyEigensystem(_frozen(energies), _frozen(vectors))


def transition_rates(p: SystemParams, alpha: str, eps: float) -> TransitionRates:
    """Absorption/emission rates of bath alpha at transition energy eps > 0."""
    if not eps > 0:
        raise ValueError(f"transition energy must be positive, got {eps}")
    nu, beta = p.bath(alpha)
    # overflow-safe: gamma_bar = nu*eps/(1 - e^(-beta*eps)), gamma = e^(-beta*eps)*gamma_bar
    boltzmann = np.exp(-beta * eps)
    gamma_bar = nu * eps / -np.expm1(-beta * eps)
    return TransitionRates(gamma_bar * boltzmann, gamma_bar)


@functools.lru_cache(maxsize=None)
def jump_operators(p: SystemParams) -> JumpOperatorSet:
    """The four jump operators with their rates.

    Each operator has exactly two nonzero elements of magnitude 1/sqrt2 in
    the energy eigenbasis and lowers the energy by its transition energy:
    [H, L] = -eps L.
    """
    ees = energy_eigensystem(p)
    phi = [ees.vectors[:, i] for i in range(4)]

    def ketbra(i: int, j: int) -> np.ndarray:
        return np.outer(phi[i], phi[j].conj())

    s = 1.0 / np.sqrt(2.0)
    e_lo, e_hi = p.transition_energies
    ops = {
        ("c", e_lo): s * ketbra(2, 3) - s * ketbra(0, 1),
        ("c", e_hi): s * ketbra(1, 3) + s * ketbra(0, 2),
        ("h", e_lo): s * ketbra(2, 3) + s * ketbra(0, 1),
        ("h", e_hi): -s * ketbra(1, 3) + s * ketbra(0, 2),
    }
    channels = []
    for (bath, eps), op in ops.items():
        rates = transition_rates(p, bath, eps)
        channels.append(
            JumpChannel(bath, eps, _frozen(op), rates.gamma, rates.gamma_bar)
        )
    return JumpOperatorSet(tuple(channels))


def _summed_rates(p: SystemParams, eps: float) -> tuple[float, float]:
    """(gamma, gamma_bar) summed over both baths at transition energy eps."""
    g_c = transition_rates(p, "c", eps)
    g_h = transition_rates(p, "h", eps)
    return g_c.gamma + g_h.gamma, g_c.gamma_bar + g_h.gamma_bar


def ness_analytic(p: SystemParams) -> NessCoefficients:
    """Closed-form steady-state populations.

    Each population is a product of the two bath-summed rates, one factor
    per transition energy (emission factor for the levels below the
    transition, absorption factor above), normalized to unit sum.
    """
    g_lo, g_lo_bar = _summed_rates(p, p.transition_energies[0])
    g_hi, g_hi_bar = _summed_rates(p, p.transition_energies[1])
    raw = np.array(
        [
            g_lo_bar * g_hi_bar,
            g_lo * g_hi_bar,
            g_lo_bar * g_hi,
            g_lo * g_hi,
        ]
    )
    c = raw / raw.sum()
    return NessCoefficients(*(float(x) for x in c))


def ness_density_matrix(p: SystemParams) -> np.ndarray:
    """The analytic steady state as a 4x4 density matrix (computational basis)."""
    ees = energy_eigensystem(p)
    c = ness_analytic(p).as_array()
    return (ees.vectors * c) @ ees.vectors.conj().T


def dissipative_generator(p: SystemParams) -> np.ndarray:
    """16x16 superoperator of the dissipative part, acting on row-major vec(rho).

    The jump operators are eigenoperators of H, so this generator commutes
    with the Hamiltonian part and equals the full generator in the frame
    co-rotating with H.
    """
    eye = np.eye(4)
    m = np.zeros((16, 16), dtype=complex)
    for rate, a in jump_operators(p).lindblad_terms():
        ada = a.conj().T @ a
        m += rate * (
            np.kron(a, a.conj())
            - 0.5 * (np.kron(ada, eye) + np.kron(eye, ada.T))
        )
    return m


def hamiltonian_generator(p: SystemParams) -> np.ndarray:
    """16x16 superoperator of the coherent part -i[H, .] on row-major vec(rho)."""
    h = build_hamiltonian(p)
    eye = np.eye(4)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


@functools.lru_cache(maxsize=None)
def liouvillian(p: SystemParams) -> np.ndarray:
    """Full 16x16 generator of the master equation on row-major vec(rho)."""
    return _frozen(hamiltonian_generator(p) + dissipative_generator(p))


def _sorted_spectrum(p: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues/right eigenvectors of the generator, by ascending |lambda|."""
    w, v = np.linalg.eig(np.asarray(liouvillian(p)))
    order = np.argsort(np.abs(w))
    return w[order], v[:, order]


def ness_from_nullspace(p: SystemParams) -> np.ndarray:
    """Steady state extracted from the generator's null space.

    Picks the eigenvector with the smallest-magnitude eigenvalue, requiring
    |lambda| < NULLSPACE_TOL with a factor-NULLSPACE_GAP_FACTOR gap to the
    next one, then reshapes, Hermitizes and normalizes the trace.
    """
    w, v = _sorted_spectrum(p)
    if abs(w[0]) >= NULLSPACE_TOL:
        raise DegenerateSteadyStateError(
            f"no null eigenvalue within {NULLSPACE_TOL}: smallest |lambda| = {abs(w[0]):.3e}"
        )
    if abs(w[1]) < NULLSPACE_GAP_FACTOR * max(abs(w[0]), NULLSPACE_TOL):
        raise DegenerateSteadyStateError(
            f"null space not unique: |lambda_1| = {abs(w[1]):.3e} too close to zero"
        )
    rho = v[:, 0].reshape(4, 4)
    rho = (rho + rho.conj().T) / 2
    tr = rho.trace().real
    if abs(tr) < 1e-12:
        raise DegenerateSteadyStateError("null vector has vanishing trace")
    return rho / tr


@functools.lru_cache(maxsize=None)
def liouvillian_gap(p: SystemParams) -> float:
    """Smallest decay rate |Re lambda| over the non-stationary modes."""
    w, _ = _sorted_spectrum(p)
    decaying = w[np.abs(w) > NULLSPACE_TOL]
    return float((-decaying.real).min())


def passivity_check(c: NessCoefficients) -> bool:
    """True iff the populations decrease with energy (no extractable work)."""
    return c.rho_2omega <= c.rho_plus <= c.rho_minus <= c.rho0
