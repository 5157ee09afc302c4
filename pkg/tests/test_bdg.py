import unittest

import numpy as np

from src.managers.bdg_manager import SIGMA_1, SIGMA_3, BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.models.bdg import BlochBdg, PauliLikeMetrics, PrototypeModel, uniform_k_grid
from src.utils.error_handler import ConfigSchemaError, StructuralValidationError, ValidationError
from tests.factories import random_bloch


class PauliLikeMetricsTests(unittest.TestCase):
    def test_tau_matrices_and_quadrature_transform(self):
        metrics = PauliLikeMetrics.for_modes(3)
        eye = np.eye(6)
        self.assertTrue(np.allclose(metrics.tau3 @ metrics.tau3, eye))
        self.assertTrue(np.allclose(metrics.tau1 @ metrics.tau1, eye))
        self.assertTrue(np.allclose(metrics.tau1 @ metrics.tau3, -metrics.tau3 @ metrics.tau1))
        self.assertTrue(np.allclose(metrics.G @ metrics.G.conj().T, eye))
        omega = metrics.symplectic_form
        self.assertTrue(np.allclose(omega, np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])))

    def test_metrics_are_cached_and_read_only(self):
        metrics = PauliLikeMetrics.for_modes(2)
        self.assertIs(metrics, PauliLikeMetrics.for_modes(2))
        with self.assertRaises(ValueError):
            metrics.tau3[0, 0] = 5


class BlochGridTests(unittest.TestCase):
    def test_minus_index_reflects_grid(self):
        bloch = BdgManager.build_prototype_bloch(5.0, 1.0, 1.3, 1.0, k_points=8)
        self.assertEqual(bloch.minus_index(0), 0)
        self.assertEqual(bloch.minus_index(1), 7)
        self.assertEqual(bloch.minus_index(4), 4)
        self.assertEqual(bloch.index_of(-2.0 * np.pi / 8), 7)
        with self.assertRaises(StructuralValidationError):
            bloch.index_of(0.1)

    def test_non_uniform_grid_rejected(self):
        grid = uniform_k_grid(4) + 0.01
        with self.assertRaises(StructuralValidationError):
            BlochBdg(n_modes=1, k_grid=grid, K_of_k=np.ones((4, 1, 1)), M_of_k=np.zeros((4, 1, 1)))


class AssembleTests(unittest.TestCase):
    def setUp(self):
        self.model = PrototypeModel(mu=5.0, t1=1.0, t2=1.3, xi_abs=1.0)
        self.bloch = BdgManager.build_from_model(self.model)

    def test_block_structure(self):
        i = 17
        H = BdgManager.assemble_at(self.bloch, i)
        j = self.bloch.minus_index(i)
        self.assertTrue(np.allclose(H, H.conj().T))
        self.assertTrue(np.allclose(H[:2, :2], self.bloch.K_of_k[i]))
        self.assertTrue(np.allclose(H[2:, 2:], self.bloch.K_of_k[j].T))
        self.assertTrue(np.allclose(H[2:, :2], self.bloch.M_of_k[j].conj()))
        self.assertTrue(np.allclose(H[:2, 2:], SIGMA_3))

    def test_k_pi_on_default_grid(self):
        self.assertEqual(self.bloch.n_k % 2, 0)
        i = self.bloch.index_of(np.pi)
        self.assertEqual(self.bloch.minus_index(i), i)
        H = BdgManager.assemble_bdg(self.bloch, np.pi)
        self.assertTrue(np.allclose(H, BdgManager.assemble_at(self.bloch, i)))
        E_plus = np.sort(DiagonalizeManager.bogoliubov_diagonalize(H).E_plus)
        self.assertAlmostEqual(E_plus[1] - E_plus[0], 2.0 * abs(self.model.t1 - self.model.t2), places=10)

    def test_pairing_violation_detected(self):
        n_k = 4
        M = np.repeat(np.array([[0.0, 0.3], [0.0, 0.0]], dtype=complex)[None], n_k, axis=0)
        K = np.repeat(5.0 * np.eye(2, dtype=complex)[None], n_k, axis=0)
        bloch = BlochBdg(n_modes=2, k_grid=uniform_k_grid(n_k), K_of_k=K, M_of_k=M)
        with self.assertRaises(StructuralValidationError):
            BdgManager.assemble_at(bloch, 1)

    def test_dynamical_matrix_and_quadrature(self):
        H = BdgManager.assemble_at(self.bloch, 0)
        tau3 = PauliLikeMetrics.for_modes(2).tau3
        self.assertTrue(np.allclose(BdgManager.dynamical_matrix(H), tau3 @ H))
        R = BdgManager.quadrature_form(H)
        self.assertLess(np.max(np.abs(R.imag)), 1e-12)
        self.assertTrue(np.allclose(BdgManager.from_quadrature(R), H))
        with self.assertRaises(ValidationError):
            BdgManager.dynamical_matrix(np.eye(3))

    def test_fourier_blocks_reproduce_prototype(self):
        mu, t1, t2, xi = 5.0, 1.0, 1.3, 1.0
        K_blocks = {
            0: mu * np.eye(2) + t1 * SIGMA_1,
            1: np.array([[0, 0], [t2, 0]], dtype=complex),
            -1: np.array([[0, t2], [0, 0]], dtype=complex),
        }
        M_blocks = {0: xi * SIGMA_3}
        bloch = BdgManager.build_from_blocks(K_blocks, M_blocks, 201)
        self.assertTrue(np.allclose(bloch.K_of_k, self.bloch.K_of_k, atol=1e-12))
        self.assertTrue(np.allclose(bloch.M_of_k, self.bloch.M_of_k, atol=1e-12))

    def test_random_instances_are_consistent(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            bloch = random_bloch(rng, int(rng.integers(1, 4)), k_points=6)
            for H in BdgManager.assemble_grid(bloch):
                self.assertTrue(np.allclose(H, H.conj().T))
                self.assertGreater(np.linalg.eigvalsh(H)[0], 0.0)

    def test_regularized_shift_is_recorded(self):
        shifted = self.bloch.regularized(0.25)
        self.assertEqual(shifted.regularization, 0.25)
        self.assertTrue(np.allclose(shifted.K_of_k - self.bloch.K_of_k, 0.25 * np.eye(2)))


class ComplexMatrixParsingTests(unittest.TestCase):
    def test_pairs_and_reals(self):
        matrix = BdgManager.parse_complex_matrix([[[1.0, 2.0], 3], [0, [0.0, -1.0]]])
        self.assertEqual(matrix[0, 0], 1 + 2j)
        self.assertEqual(matrix[0, 1], 3)
        self.assertEqual(matrix[1, 1], -1j)

    def test_malformed_entries(self):
        for bad in ([[1, 2]], [[[1, 2, 3]]], [["a"]], 5, [[True]]):
            with self.subTest(bad=bad):
                with self.assertRaises(ConfigSchemaError):
                    BdgManager.parse_complex_matrix(bad)


if __name__ == "__main__":
    unittest.main()
