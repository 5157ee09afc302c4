import unittest

import numpy as np

from src.managers.bdg_manager import SIGMA_1, SIGMA_2, BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.models.bdg import PauliLikeMetrics, PrototypeModel
from src.models.spectra import StabilityKind
from src.utils.error_handler import NotPositiveDefiniteError, PreconditionError, ValidationError
from tests.factories import random_bloch, random_real_space


class ClosedFormBandsTests(unittest.TestCase):
    def test_prototype_bands_match_closed_form(self):
        for t2 in (0.7, 1.3):
            with self.subTest(t2=t2):
                model = PrototypeModel(mu=5.0, t1=1.0, t2=t2, xi_abs=1.0)
                bloch = BdgManager.build_from_model(model)
                self.assertAlmostEqual(model.mu_tilde, np.sqrt(24.0), places=12)
                k = bloch.k_grid
                q = np.sqrt(1.0 + t2 ** 2 + 2.0 * t2 * np.cos(k))
                expected = np.stack([model.mu_tilde - q, model.mu_tilde + q], axis=1)
                bogs = DiagonalizeManager.diagonalize_grid(bloch)
                numeric = np.stack([np.sort(b.E_plus) for b in bogs])
                self.assertLessEqual(np.max(np.abs(numeric - expected)), 1e-10)
                holes = np.stack([np.sort(-b.E_minus_neg) for b in bogs])
                self.assertLessEqual(np.max(np.abs(holes - expected)), 1e-10)


class BogoliubovTests(unittest.TestCase):
    def test_pseudo_unitarity_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            H = random_real_space(rng, n)
            bog = DiagonalizeManager.bogoliubov_diagonalize(H)
            tau3 = PauliLikeMetrics.for_modes(n).tau3
            self.assertEqual(bog.stability, StabilityKind.THERMO_AND_DYNAMICAL)
            self.assertLessEqual(np.max(np.abs(bog.V.conj().T @ tau3 @ bog.V - tau3)), 1e-10)
            residual = tau3 @ H @ bog.V - bog.V @ bog.Lambda
            self.assertLessEqual(np.max(np.abs(residual)), 1e-9 * np.linalg.norm(H, 2))
            self.assertTrue(np.all(bog.E_plus > 0))
            self.assertTrue(np.all(np.diff(bog.E_plus) >= -1e-12))

    def test_dynamically_unstable_single_mode(self):
        H = np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex)
        bog = DiagonalizeManager.bogoliubov_diagonalize(H)
        self.assertEqual(bog.stability, StabilityKind.DYNAMICALLY_UNSTABLE)
        self.assertIsNone(bog.V)
        self.assertGreater(np.max(np.abs(bog.raw_eigenvalues.imag)), 1.0)
        self.assertEqual(DiagonalizeManager.classify_stability(H, bog), StabilityKind.DYNAMICALLY_UNSTABLE)

    def test_landau_unstable_negative_mode(self):
        H = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)
        bog = DiagonalizeManager.bogoliubov_diagonalize(H)
        self.assertEqual(bog.stability, StabilityKind.LANDAU_UNSTABLE)
        self.assertTrue(np.allclose(np.sort(bog.E_plus), [-1.0, 1.0]))

    def test_semidefinite_is_thermodynamically_stable(self):
        H = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
        bog = DiagonalizeManager.bogoliubov_diagonalize(H)
        self.assertEqual(bog.stability, StabilityKind.THERMO_AND_DYNAMICAL)
        self.assertEqual(bog.method, "eig")

    def test_grid_holes_are_particle_hole_partners(self):
        rng = np.random.default_rng(5)
        bloch = random_bloch(rng, 2, k_points=6)
        bogs = DiagonalizeManager.diagonalize_grid(bloch)
        tau1 = PauliLikeMetrics.for_modes(2).tau1
        for i, bog in enumerate(bogs):
            partner = bogs[bloch.minus_index(i)]
            self.assertTrue(np.allclose(bog.V[:, 2:], tau1 @ partner.V[:, :2].conj()))
            self.assertTrue(np.allclose(bog.E_minus_neg, -partner.E_plus))


class SqueezeTests(unittest.TestCase):
    def setUp(self):
        self.model = PrototypeModel(mu=5.0, t1=1.0, t2=1.3, xi_abs=1.0)
        self.bloch = BdgManager.build_from_model(self.model)

    def test_reduced_matrix_matches_prototype(self):
        squeezes = DiagonalizeManager.squeeze_grid(self.bloch)
        bogs = DiagonalizeManager.diagonalize_grid(self.bloch)
        tau3 = PauliLikeMetrics.for_modes(2).tau3
        t1, t2 = self.model.t1, self.model.t2
        for k, sq, bog in zip(self.bloch.k_grid, squeezes, bogs):
            expected = (self.model.mu_tilde * np.eye(2) + (t1 + t2 * np.cos(k)) * SIGMA_1
                        + t2 * np.sin(k) * SIGMA_2)
            self.assertLessEqual(np.max(np.abs(sq.K_tilde - expected)), 1e-8)
            self.assertLessEqual(sq.cross_check, 1e-8)
            self.assertLessEqual(np.max(np.abs(bog.V.conj().T @ tau3 @ bog.V - tau3)), 1e-10)
            self.assertAlmostEqual(sq.gap_center, self.model.mu_tilde, places=8)

    def test_defining_relation_and_unitarity(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            H = random_real_space(rng, n)
            sq = DiagonalizeManager.compute_W(H)
            tau3 = PauliLikeMetrics.for_modes(n).tau3
            exp_2W = sq.exp_W @ sq.exp_W
            self.assertLessEqual(np.max(np.abs(exp_2W @ H @ exp_2W - tau3 @ H @ tau3)), 1e-8 * np.linalg.norm(H, 2))
            self.assertTrue(np.allclose(sq.U @ sq.U.conj().T, np.eye(n), atol=1e-10))
            self.assertTrue(np.allclose(sq.W @ tau3, -tau3 @ sq.W, atol=1e-10))

    def test_not_positive_definite_rejected(self):
        H = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)
        with self.assertRaises(NotPositiveDefiniteError):
            DiagonalizeManager.compute_W(H)

    def test_deformation_path_preserves_spectrum(self):
        H = BdgManager.assemble_at(self.bloch, 30)
        sq = DiagonalizeManager.compute_W(H)
        lambdas = [0.0, 0.25, 0.5, 0.75, 1.0]
        report = DiagonalizeManager.deformation_path(H, sq, lambdas)
        self.assertLessEqual(report.max_spectral_deviation, 1e-8)
        self.assertTrue(all(r <= 1e-10 * np.linalg.norm(H, 2) for r in report.endpoint_residuals))
        self.assertGreater(report.min_gap, 0.0)
        with self.assertRaises(PreconditionError):
            DiagonalizeManager.deformation_path(H, sq, [0.2, 1.0])

    def test_cosh_sinh_deformation_rescales_gap(self):
        i = 30
        H = BdgManager.assemble_at(self.bloch, i)
        sq = DiagonalizeManager.compute_W(H)
        report = DiagonalizeManager.chaudhary_deformation(sq, [0.0, 0.5, 1.0])
        k = self.bloch.k_grid[i]
        gap = 2.0 * abs(self.model.t1 + self.model.t2 * np.exp(1j * k))
        self.assertAlmostEqual(report.gaps[0], gap, places=8)
        self.assertAlmostEqual(report.gaps[-1], np.cosh(self.model.squeeze_r) ** 2 * gap, places=8)
        self.assertGreater(report.min_gap, 0.0)


class WilliamsonTests(unittest.TestCase):
    def test_symplectic_eigenvalues_match_bogoliubov(self):
        bloch = BdgManager.build_prototype_bloch(5.0, 1.0, 1.3, 1.0, k_points=11)
        H = BdgManager.assemble_at(bloch, 0)
        R = BdgManager.quadrature_form(H).real
        J, R_prime = DiagonalizeManager.williamson_diagonalize(R)
        omega = PauliLikeMetrics.for_modes(2).symplectic_form
        self.assertTrue(np.allclose(J.T @ omega @ J, omega, atol=1e-10))
        self.assertTrue(np.allclose(R_prime, np.diag(np.diag(R_prime)), atol=1e-10))
        bog = DiagonalizeManager.bogoliubov_diagonalize(H)
        self.assertTrue(np.allclose(np.sort(np.diag(R_prime)[:2]), np.sort(bog.E_plus), atol=1e-10))

    def test_random_real_space_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            H = random_real_space(rng, n)
            R = BdgManager.quadrature_form(H)
            self.assertLessEqual(np.max(np.abs(R.imag)), 1e-12)
            J, R_prime = DiagonalizeManager.williamson_diagonalize(R)
            omega = PauliLikeMetrics.for_modes(n).symplectic_form
            self.assertLessEqual(np.max(np.abs(J.T @ omega @ J - omega)), 1e-9)
            E_plus = DiagonalizeManager.bogoliubov_diagonalize(H).E_plus
            nu = np.sort(np.diag(R_prime)[:n])
            self.assertLessEqual(np.max(np.abs(nu - np.sort(E_plus))), 1e-10 * max(1.0, float(np.max(E_plus))))

    def test_complex_bloch_block_is_realified(self):
        bloch = BdgManager.build_prototype_bloch(5.0, 1.0, 1.3, 1.0, k_points=11)
        i = 3
        R = BdgManager.quadrature_form(BdgManager.assemble_at(bloch, i))
        self.assertGreater(np.max(np.abs(R.imag)), 1e-3)
        J, R_prime = DiagonalizeManager.williamson_diagonalize(R)
        self.assertEqual(J.shape, (8, 8))
        omega = PauliLikeMetrics.for_modes(4).symplectic_form
        self.assertTrue(np.allclose(J.T @ omega @ J, omega, atol=1e-9))
        self.assertTrue(np.allclose(R_prime, np.diag(np.diag(R_prime)), atol=1e-9))
        bogs = DiagonalizeManager.diagonalize_grid(bloch)
        expected = np.sort(np.concatenate([bogs[i].E_plus, bogs[bloch.minus_index(i)].E_plus]))
        nu = DiagonalizeManager.symplectic_eigenvalues(R)
        self.assertLessEqual(np.max(np.abs(nu - expected)), 1e-10 * float(np.max(expected)))

    def test_random_complex_bloch_blocks(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            bloch = random_bloch(rng, n, k_points=5)
            bogs = DiagonalizeManager.diagonalize_grid(bloch)
            i = int(rng.integers(0, bloch.n_k))
            R = BdgManager.quadrature_form(BdgManager.assemble_at(bloch, i))
            expected = np.sort(np.concatenate([bogs[i].E_plus, bogs[bloch.minus_index(i)].E_plus]))
            nu = DiagonalizeManager.symplectic_eigenvalues(R)
            if nu.size == n:
                expected = np.sort(bogs[i].E_plus)
            self.assertLessEqual(np.max(np.abs(nu - expected)), 1e-10 * float(np.max(expected)))

    def test_non_hermitian_complex_rejected(self):
        R = np.eye(2, dtype=complex)
        R[0, 1], R[1, 0] = 0.1j, 0.1j
        with self.assertRaises(ValidationError):
            DiagonalizeManager.williamson_diagonalize(R)


class RegularizationTests(unittest.TestCase):
    def test_semidefinite_shift(self):
        H = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
        shifted = DiagonalizeManager.regularize_semidefinite(H, 1e-3)
        self.assertAlmostEqual(shifted.min_eigenvalue, 1e-3)
        self.assertEqual(shifted.delta, 1e-3)
        with self.assertRaises(ValidationError):
            DiagonalizeManager.regularize_semidefinite(H, 0.0)
        with self.assertRaises(NotPositiveDefiniteError):
            DiagonalizeManager.regularize_semidefinite(np.diag([1.0, -1.0]).astype(complex), 1e-3)

    def test_regularized_grid_records_delta(self):
        bloch = BdgManager.build_prototype_bloch(5.0, 1.0, 1.0, 0.0, k_points=9)
        shifted = DiagonalizeManager.regularize_bloch(bloch, 0.5)
        bogs = DiagonalizeManager.diagonalize_grid(shifted)
        self.assertTrue(all(b.regularization == 0.5 for b in bogs))


if __name__ == "__main__":
    unittest.main()
