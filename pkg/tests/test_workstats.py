import itertools

import numpy as np
import pytest

from conftest import FIG_RELAX, FIG_SCAN, random_params, random_unitary
from nesstur import qmat, workstats
from nesstur.model import build_hamiltonian, energy_eigensystem, ness_analytic, ness_density_matrix


class TestTpmDistribution:
    def test_identity_single_atom(self):
        d = workstats.tpm_distribution_ness(FIG_RELAX, np.eye(4, dtype=complex))
        assert d.atoms == [(0.0, pytest.approx(1.0, abs=1e-15))]

    def test_swap_atoms(self):
        p = FIG_RELAX
        c = ness_analytic(p)
        d = workstats.tpm_distribution_ness(p, workstats.unitary_swap_entangled(p))
        assert len(d.atoms) == 3
        assert np.allclose(d.w, [-2 * p.g, 0.0, 2 * p.g], atol=1e-12)
        assert d.prob[0] == pytest.approx(c.rho_plus, abs=1e-14)
        assert d.prob[1] == pytest.approx(c.rho0 + c.rho_2omega, abs=1e-14)
        assert d.prob[2] == pytest.approx(c.rho_minus, abs=1e-14)

    def test_maxwork_atoms(self):
        p = FIG_RELAX
        c = ness_analytic(p)
        d = workstats.tpm_distribution_ness(p, workstats.unitary_max_work(p))
        # zero-work atom is absent for the full permutation
        assert np.allclose(d.w, [-2 * p.omega, -2 * p.g, 2 * p.g, 2 * p.omega], atol=1e-12)
        assert np.allclose(
            d.prob, [c.rho_2omega, c.rho_plus, c.rho_minus, c.rho0], atol=1e-14
        )

    def test_support_within_transition_differences(self, rng):
        p = FIG_SCAN
        ees = energy_eigensystem(p)
        diffs = (ees.energies[:, None] - ees.energies[None, :]).ravel()
        for _ in range(10):
            d = workstats.tpm_distribution_ness(p, random_unitary(rng))
            for w in d.w:
                assert np.abs(diffs - w).min() < 1e-9 * p.omega

    def test_atom_merging_preserves_moments(self, rng):
        # g = omega/2 makes several transition differences coincide
        p = FIG_SCAN
        ees = energy_eigensystem(p)
        pops = ness_analytic(p).as_array()
        u = random_unitary(rng)
        d = workstats.tpm_distribution(p, ness_density_matrix(p), u)
        assert np.all(np.diff(d.w) > 1e-9 * p.omega)
        # oracle: unmerged double sum
        t_mn = np.abs(ees.vectors.conj().T @ u @ ees.vectors) ** 2
        d_e = ees.energies[:, None] - ees.energies[None, :]
        mean = float(np.sum(t_mn * d_e * pops[None, :]))
        second = float(np.sum(t_mn * d_e**2 * pops[None, :]))
        m = workstats.work_moments(d)
        assert m.mean == pytest.approx(mean, abs=1e-12)
        assert m.second == pytest.approx(second, abs=1e-12)

    def test_probabilities_sum_to_one(self, rng):
        for _ in range(20):
            d = workstats.tpm_distribution_ness(FIG_RELAX, random_unitary(rng))
            assert abs(d.prob.sum() - 1.0) < 1e-12
            assert np.all(d.prob >= 0)

    def test_coherent_input_is_dephased(self, rng):
        p = FIG_RELAX
        u = random_unitary(rng)
        state = u @ ness_density_matrix(p) @ u.conj().T  # has energy coherences
        state = (state + state.conj().T) / 2
        quench = workstats.unitary_max_work(p)
        d_direct = workstats.tpm_distribution(p, state, quench)
        d_dephased = workstats.tpm_distribution(
            p, workstats.dephase_in_energy_basis(p, state), quench
        )
        assert np.allclose(d_direct.w, d_dephased.w, atol=1e-14)
        assert np.allclose(d_direct.prob, d_dephased.prob, atol=1e-14)

    def test_rejects_non_unitary(self, rng):
        with pytest.raises(ValueError, match="unitary"):
            workstats.tpm_distribution_ness(FIG_RELAX, np.ones((4, 4)))

    def test_csv_export(self, tmp_path):
        d = workstats.tpm_distribution_ness(FIG_RELAX, workstats.unitary_swap_entangled(FIG_RELAX))
        path = tmp_path / "dist.csv"
        d.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "w,prob"
        assert len(lines) == 4


class TestWorkMoments:
    def test_swap_closed_forms(self, rng):
        for _ in range(50):
            p = random_params(rng)
            c = ness_analytic(p)
            m = workstats.work_moments(
                workstats.tpm_distribution_ness(p, workstats.unitary_swap_entangled(p))
            )
            assert abs(m.mean - 2 * p.g * (c.rho_minus - c.rho_plus)) < 1e-12
            assert abs(m.second - 4 * p.g**2 * (c.rho_plus + c.rho_minus)) < 1e-12
            assert abs(m.variance - (m.second - m.mean**2)) < 1e-14

    def test_maxwork_mean_closed_form(self, rng):
        # oracle: permutation expansion of Tr[H (U rho U^dag - rho)]
        for _ in range(20):
            p = random_params(rng)
            c = ness_analytic(p)
            m = workstats.work_moments(
                workstats.tpm_distribution_ness(p, workstats.unitary_max_work(p))
            )
            expected = 2 * p.omega * (c.rho0 - c.rho_2omega) + 2 * p.g * (c.rho_minus - c.rho_plus)
            assert abs(m.mean - expected) < 1e-12

    def test_identity_quench_undefined_rel_err(self):
        m = workstats.work_moments(
            workstats.tpm_distribution_ness(FIG_RELAX, np.eye(4, dtype=complex))
        )
        assert m.mean == 0.0
        assert m.variance == 0.0
        assert m.rel_err_sq is None

    def test_tpm_mean_equals_energy_change(self, rng):
        # diagonal first-measurement state makes the TPM mean the unmeasured mean
        p = FIG_RELAX
        h = build_hamiltonian(p)
        rho = ness_density_matrix(p)
        for _ in range(20):
            u = random_unitary(rng)
            m = workstats.work_moments(workstats.tpm_distribution(p, rho, u))
            expected = np.trace(h @ (u @ rho @ u.conj().T - rho)).real
            assert abs(m.mean - expected) < 1e-10


class TestQuenchUnitaries:
    def test_swap_is_involution(self, rng):
        p = random_params(rng)
        u = workstats.unitary_swap_entangled(p)
        assert np.abs(u @ u - np.eye(4)).max() == 0.0
        assert qmat.unitarity_defect(u) < 1e-14

    def test_swap_matrix_from_basis_change(self, rng):
        # oracle: conjugation of the eigen-permutation by the basis matrix
        p = random_params(rng)
        ees = energy_eigensystem(p)
        perm = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
        expected = ees.vectors @ perm @ ees.vectors.conj().T
        u = workstats.unitary_swap_entangled(p)
        assert np.abs(u - expected).max() < 1e-14
        assert np.allclose(u, np.diag([1.0, 1.0, -1.0, 1.0]), atol=1e-14)

    def test_swap_preserves_concurrence_of_ness_form(self, rng):
        from nesstur.entangle import concurrence

        for _ in range(10):
            p = random_params(rng)
            rho = ness_density_matrix(p)
            u = workstats.unitary_swap_entangled(p)
            rho_q = u @ rho @ u.conj().T
            assert concurrence(rho_q) == pytest.approx(concurrence(rho), abs=1e-12)

    def test_maxwork_is_involution(self, rng):
        p = random_params(rng)
        u = workstats.unitary_max_work(p)
        assert np.abs(u @ u - np.eye(4)).max() == 0.0

    def test_maxwork_beats_all_basis_permutations(self):
        # oracle: brute force over all 24 permutation unitaries of the eigenbasis
        p = FIG_RELAX
        rho = ness_density_matrix(p)
        ees = energy_eigensystem(p)
        best = workstats.work_moments(
            workstats.tpm_distribution(p, rho, workstats.unitary_max_work(p))
        ).mean
        for perm in itertools.permutations(range(4)):
            u = ees.vectors @ np.eye(4, dtype=complex)[list(perm)] @ ees.vectors.conj().T
            mean = workstats.work_moments(workstats.tpm_distribution(p, rho, u)).mean
            assert mean <= best + 1e-12


class TestViolationUnitary:
    def test_raw_defect_within_rounding(self):
        assert qmat.unitarity_defect(workstats.VIOLATION_UNITARY_RAW) <= 5e-6

    def test_polar_correction_unitary(self):
        u = workstats.unitary_violation()
        assert qmat.unitarity_defect(u) < 1e-12
        # nearest unitary stays within the rounding defect of the table
        assert np.abs(u - workstats.VIOLATION_UNITARY_RAW).max() < 5e-6

    def test_reindexing_from_reversed_basis(self):
        # tabulated in the reversed product basis: entry (0,0) there is (3,3) here
        raw = workstats.VIOLATION_UNITARY_RAW
        assert raw[3, 3] == 0.61214 - 0.084476j
        assert raw[0, 0] == -0.133258 - 0.262879j
        assert raw[3, 0] == 0.166498 - 0.116762j


class TestHaarSampler:
    def test_unitarity(self):
        for seed in range(20):
            assert qmat.unitarity_defect(workstats.haar_random_unitary(seed)) < 1e-12

    def test_seed_determinism(self):
        a = workstats.haar_random_unitary(977)
        b = workstats.haar_random_unitary(977)
        assert np.array_equal(a, b)
        c = workstats.haar_random_unitary(978)
        assert not np.array_equal(a, c)

    def test_first_entry_moment_smoke(self):
        n = 4000
        vals = np.array([abs(workstats.haar_random_unitary(seed)[0, 0]) ** 2 for seed in range(n)])
        # E|U00|^2 = 1/4 exactly; Var = 3/80 for dim 4
        se = np.sqrt(3 / 80 / n)
        assert abs(vals.mean() - 0.25) < 4 * se

    def test_ginibre_batch_matches_sampler(self):
        base = 555
        batch = workstats.ginibre_batch(base, 5)
        for i in range(5):
            q, r = np.linalg.qr(batch[i])
            u = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
            assert np.array_equal(u, workstats.haar_random_unitary(base + i))

    def test_first_column_distribution_ks(self):
        # |U00|^2 of a Haar unitary on U(4) follows Beta(1, 3)
        from scipy.stats import kstest

        n = 100_000
        vals = np.array([abs(workstats.haar_random_unitary(seed)[0, 0]) ** 2 for seed in range(n)])
        result = kstest(vals, lambda x: 1 - (1 - x) ** 3)
        assert result.pvalue > 0.01
