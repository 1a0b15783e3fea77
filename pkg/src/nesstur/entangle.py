"""Entanglement quantifiers, criteria, and the closest-separable projection.

For two qubits, separability is equivalent to a positive partial transpose,
so the Frobenius projection onto separable states reduces to a spectral
problem on the partially transposed state: project its eigenvalues onto the
probability simplex, reassemble, and transpose back.  The dropped
constraint (positivity of the candidate itself) is checked afterwards and
reported via ``relaxation_tight``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import qmat
from .model import NessCoefficients, SystemParams, ness_analytic, ness_density_matrix
from .workstats import (
    WorkMoments,
    dephase_in_energy_basis,
    tpm_distribution,
    unitary_swap_entangled,
    work_moments,
)

PPT_TOL = 1e-10

_SIGMA_Y_PAIR = np.array(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
    ],
    dtype=complex,
)  # sigma_y (x) sigma_y


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    Square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy), sorted
    descending as l1..l4; returns max(0, l1 - l2 - l3 - l4).
    """
    rho = qmat.check_density_matrix(rho)
    rho_tilde = _SIGMA_Y_PAIR @ rho.conj() @ _SIGMA_Y_PAIR
    evals = np.linalg.eigvals(rho @ rho_tilde)
    lam = np.sqrt(np.abs(np.sort(evals.real)[::-1]))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def mutual_information(rho) -> float:
    """S(rho_A) + S(rho_B) - S(rho_AB), in nats."""
    rho = qmat.check_density_matrix(rho)
    s_a = qmat.von_neumann_entropy(qmat.partial_trace(rho, "first"), check=False)
    s_b = qmat.von_neumann_entropy(qmat.partial_trace(rho, "second"), check=False)
    return max(0.0, s_a + s_b - qmat.von_neumann_entropy(rho, check=False))


def criterion_populations(c: NessCoefficients) -> bool:
    """Steady state entangled iff (rho_- - rho_+)^2 > 4 rho_0 rho_2omega."""
    return (c.rho_minus - c.rho_plus) ** 2 > 4 * c.rho0 * c.rho_2omega


def criterion_thermo(xi: float, gamma: float) -> bool:
    """Entanglement witness from thermodynamic observables.

    xi is the second work moment of the entangled-swap quench over 4g^2,
    gamma the steady-state purity; entangled iff 2*gamma > 2(xi-1)^2 + xi^2.
    """
    return 2 * gamma > 2 * (xi - 1) ** 2 + xi**2


def v_bounds(w: float, gamma: float) -> tuple[float, float]:
    """Window the dimensionless work variance must occupy when entangled.

    w is the mean work over 2g, gamma the purity; the window is
    (2 - 3w^2 -+ sqrt(6 gamma - 2))/3 and requires gamma >= 1/3.
    """
    radicand = 6 * gamma - 2
    if radicand < 0:
        raise ValueError(f"bounds undefined for purity {gamma} < 1/3")
    root = np.sqrt(radicand)
    return ((2 - 3 * w**2 - root) / 3, (2 - 3 * w**2 + root) / 3)


def project_to_simplex(u) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex.

    Sort descending, find the largest k with u_k + (1 - sum_{i<=k} u_i)/k
    positive, shift the top k by that amount and zero the rest.
    """
    u = np.asarray(u, dtype=float)
    s = np.sort(u)[::-1]
    cumulative = np.cumsum(s)
    k = np.arange(1, u.size + 1)
    feasible = s + (1.0 - cumulative) / k > 0
    k_star = int(k[feasible][-1])
    shift = (1.0 - cumulative[k_star - 1]) / k_star
    return np.maximum(u + shift, 0.0)


@dataclass(frozen=True)
class SeparableProjection:
    """Frobenius projection of a state onto the separable (PPT) set.

    ``relaxation_tight`` records whether the candidate itself came out
    positive; when False the reported distance is only a lower bound on the
    true separable distance.
    """

    projected_state: np.ndarray
    distance: float
    relaxation_tight: bool
    input_was_ppt: bool

    def to_json_dict(self) -> dict:
        return {
            "projected_state": [
                [[z.real, z.imag] for z in row] for row in self.projected_state
            ],
            "distance": self.distance,
            "relaxation_tight": self.relaxation_tight,
            "input_was_ppt": self.input_was_ppt,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def closest_separable(rho) -> SeparableProjection:
    """Closest separable two-qubit state in the Frobenius norm.

    PPT inputs are returned unchanged with distance 0.  Otherwise the
    partial transpose is eigendecomposed, its spectrum projected onto the
    probability simplex (the exact unit-trace positive Frobenius
    projection, which shares the eigenvectors), and the result transposed
    back.  The candidate is PPT by construction; its own positivity is the
    relaxed constraint reported via ``relaxation_tight``.
    """
    rho = qmat.check_density_matrix(rho)
    transposed = qmat.partial_transpose(rho)
    eig = qmat.hermitian_eig(transposed)
    if eig.eigenvalues.min() >= -PPT_TOL:
        return SeparableProjection(rho, 0.0, True, True)
    projected_spectrum = project_to_simplex(eig.eigenvalues)
    sigma = (eig.eigenvectors * projected_spectrum) @ eig.eigenvectors.conj().T
    candidate = qmat.partial_transpose(sigma)
    candidate = (candidate + candidate.conj().T) / 2
    tight = bool(np.linalg.eigvalsh(candidate).min() >= -PPT_TOL)
    return SeparableProjection(
        candidate,
        qmat.frobenius_distance(rho, candidate),
        tight,
        False,
    )


@dataclass(frozen=True)
class SeparableWorkComparison:
    """Work statistics of one quench on a state vs on its separable projection."""

    moments_input: WorkMoments
    moments_projected: WorkMoments
    ratio_rel_err_sq: float | None
    projection: SeparableProjection


def separable_work_comparison(
    p: SystemParams, u, dephase: bool = True
) -> SeparableWorkComparison:
    """Compare quench work statistics on the steady state and its projection.

    The projected state is energy-dephased before the two-point-measurement
    stage by default (the first measurement destroys coherences); pass
    ``dephase=False`` to feed it in untouched.
    """
    rho = ness_density_matrix(p)
    proj = closest_separable(rho)
    m_in = work_moments(tpm_distribution(p, rho, u))
    if proj.input_was_ppt:
        # projection is the identity here, keep the comparison exactly equal
        m_proj = m_in
    else:
        projected = proj.projected_state
        if dephase:
            projected = dephase_in_energy_basis(p, projected)
        m_proj = work_moments(tpm_distribution(p, projected, u))
    ratio = (
        m_proj.rel_err_sq / m_in.rel_err_sq
        if m_in.rel_err_sq is not None and m_proj.rel_err_sq is not None
        else None
    )
    return SeparableWorkComparison(m_in, m_proj, ratio, proj)


@dataclass(frozen=True)
class VBounds:
    lower: float
    upper: float
    v: float
    w: float


@dataclass(frozen=True)
class EntanglementReport:
    """Entanglement summary of the steady state at one parameter point."""

    concurrence: float
    mutual_information: float
    purity: float
    criterion_populations: bool
    criterion_thermo: bool
    v_bounds: VBounds | None

    def to_json_dict(self) -> dict:
        vb = self.v_bounds
        return {
            "concurrence": self.concurrence,
            "mutual_information": self.mutual_information,
            "purity": self.purity,
            "criterion_populations": self.criterion_populations,
            "criterion_thermo": self.criterion_thermo,
            "v_bounds": None
            if vb is None
            else {"lower": vb.lower, "upper": vb.upper, "v": vb.v, "w": vb.w},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def entanglement_report(p: SystemParams) -> EntanglementReport:
    """Quantifiers and both criteria for the steady state at parameters p."""
    rho = ness_density_matrix(p)
    c = ness_analytic(p)
    gamma = qmat.purity(rho, check=False)
    moments = work_moments(tpm_distribution(p, rho, unitary_swap_entangled(p)))
    xi = moments.second / (4 * p.g**2)
    w = moments.mean / (2 * p.g)
    v = moments.variance / (4 * p.g**2)
    bounds = None
    if 6 * gamma - 2 >= 0:
        lo, hi = v_bounds(w, gamma)
        bounds = VBounds(lo, hi, v, w)
    return EntanglementReport(
        concurrence=concurrence(rho),
        mutual_information=mutual_information(rho),
        purity=gamma,
        criterion_populations=criterion_populations(c),
        criterion_thermo=criterion_thermo(xi, gamma),
        v_bounds=bounds,
    )
