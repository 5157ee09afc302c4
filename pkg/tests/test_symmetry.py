import unittest

import numpy as np

from src.managers.bdg_manager import SIGMA_1, SIGMA_2, SIGMA_3, BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.managers.symmetry_manager import SymmetryManager
from src.models.bdg import PrototypeModel
from src.models.symmetry import SymmetryKind, SymmetryOperator
from src.utils.error_handler import PreconditionError, SymmetryValidationError
from tests.factories import random_bloch, sls_instance

INSTANCES_PER_KIND = 100


def _h_tau_grid(bloch):
    return BdgManager.dynamical_grid(BdgManager.assemble_grid(bloch))


class OperatorCheckTests(unittest.TestCase):
    def test_particle_hole_holds_for_any_bdg(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            bloch = random_bloch(rng, int(rng.integers(1, 4)), k_points=6)
            report = SymmetryManager.check_symmetry(
                _h_tau_grid(bloch), SymmetryManager.particle_hole(bloch.n_modes), bloch.k_grid)
            self.assertTrue(report.holds, report.residual)
            self.assertEqual(len(report.residuals_per_k), 6)

    def test_time_reversal_requires_real_blocks(self):
        rng = np.random.default_rng(22)
        real = random_bloch(rng, 2, k_points=6, real=True)
        complex_ = random_bloch(rng, 2, k_points=6, real=False)
        trs = SymmetryManager.time_reversal(np.eye(2))
        self.assertTrue(SymmetryManager.check_symmetry(_h_tau_grid(real), trs).holds)
        self.assertFalse(SymmetryManager.check_symmetry(_h_tau_grid(complex_), trs).holds)
        chiral = SymmetryManager.chiral(np.eye(2))
        self.assertTrue(SymmetryManager.check_symmetry(_h_tau_grid(real), chiral).holds)

    def test_prototype_has_all_intrinsic_symmetries(self):
        bloch = BdgManager.build_prototype_bloch(5.0, 1.0, 1.3, 1.0, k_points=21)
        ops = [SymmetryManager.particle_hole(2), SymmetryManager.time_reversal(np.eye(2)),
               SymmetryManager.chiral(np.eye(2))]
        reports = SymmetryManager.check_operators_on_grid(bloch, ops)
        self.assertEqual([r.kind for r in reports],
                         [SymmetryKind.PARTICLE_HOLE, SymmetryKind.TIME_REVERSAL, SymmetryKind.CHIRAL])
        self.assertTrue(all(r.holds for r in reports))

    def test_invalid_operators_rejected(self):
        with self.assertRaises(SymmetryValidationError):
            SymmetryManager.validate_operator(
                SymmetryOperator(O=2.0 * np.eye(2), antiunitary=False, eta=1, eps_k=1))
        with self.assertRaises(SymmetryValidationError):
            SymmetryManager.validate_operator(
                SymmetryOperator(O=np.eye(2), antiunitary=False, eta=-1, eps_k=1))
        with self.assertRaises(SymmetryValidationError):
            SymmetryManager.validate_operator(
                SymmetryOperator(O=np.eye(2), antiunitary=False, eta=2, eps_k=1))
        with self.assertRaises(SymmetryValidationError):
            SymmetryManager.validate_sublattice_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


class SqueezePreservesSymmetryTests(unittest.TestCase):
    def _check_kind(self, seed, make_instance, make_operator):
        rng = np.random.default_rng(seed)
        for index in range(INSTANCES_PER_KIND):
            bloch = make_instance(rng)
            report = SymmetryManager.squeeze_preservation_test(bloch, make_operator(bloch))
            with self.subTest(instance=index):
                self.assertLessEqual(report.W_residual, 1e-9)
                self.assertTrue(report.holds)

    def test_particle_hole(self):
        self._check_kind(
            31,
            lambda rng: random_bloch(rng, int(rng.integers(1, 7)), k_points=4),
            lambda bloch: SymmetryManager.particle_hole(bloch.n_modes),
        )

    def test_time_reversal(self):
        self._check_kind(
            32,
            lambda rng: random_bloch(rng, int(rng.integers(1, 7)), k_points=4, real=True),
            lambda bloch: SymmetryManager.time_reversal(np.eye(bloch.n_modes)),
        )

    def test_chiral(self):
        self._check_kind(
            33,
            lambda rng: random_bloch(rng, int(rng.integers(1, 7)), k_points=4, real=True),
            lambda bloch: SymmetryManager.chiral(np.eye(bloch.n_modes)),
        )

    def test_sublattice(self):
        self._check_kind(
            34,
            lambda rng: sls_instance(rng, int(rng.integers(1, 4)), k_points=6)[0],
            lambda bloch: SymmetryManager.sublattice(
                np.diag(np.r_[np.ones(bloch.n_modes // 2), -np.ones(bloch.n_modes // 2)])),
        )

    def test_broken_upstream_symmetry_is_a_precondition_failure(self):
        rng = np.random.default_rng(35)
        bloch = random_bloch(rng, 2, k_points=4, real=False)
        with self.assertRaises(PreconditionError):
            SymmetryManager.squeeze_preservation_test(bloch, SymmetryManager.time_reversal(np.eye(2)))


class HiddenSublatticeTests(unittest.TestCase):
    def setUp(self):
        self.model = PrototypeModel(mu=5.0, t1=1.0, t2=1.3, xi_abs=1.0)
        self.bloch = BdgManager.build_prototype_bloch(5.0, 1.0, 1.3, 1.0, k_points=41)
        self.S = np.diag([1.0, -1.0]).astype(complex)

    def test_prototype_reduced_matrix_is_sublattice_symmetric(self):
        report = SymmetryManager.check_sublattice(DiagonalizeManager.squeeze_grid(self.bloch), self.S)
        self.assertTrue(report.holds, report.diagnostic)
        self.assertAlmostEqual(report.epsilon, self.model.mu_tilde, places=8)
        self.assertLessEqual(report.epsilon_spread, 1e-9)

    def test_staggered_potential_breaks_it(self):
        def K_func(k):
            return (5.0 * np.eye(2) + (1.0 + 1.3 * np.cos(k)) * SIGMA_1
                    + 1.3 * np.sin(k) * SIGMA_2 + 0.2 * SIGMA_3)

        bloch = BdgManager.build_bloch(2, 21, K_func, lambda k: SIGMA_3)
        report = SymmetryManager.check_sublattice(DiagonalizeManager.squeeze_grid(bloch), self.S)
        self.assertFalse(report.holds)
        self.assertTrue(report.diagnostic)

    def test_offdiagonal_block_of_prototype(self):
        squeezes = DiagonalizeManager.squeeze_grid(self.bloch)
        h = np.stack([s.K_tilde - self.model.mu_tilde * np.eye(2) for s in squeezes])
        D, _ = SymmetryManager.offdiagonalize_in_S_basis(h, self.S)
        expected = 1.0 + 1.3 * np.exp(-1j * self.bloch.k_grid)
        self.assertLessEqual(np.max(np.abs(D[:, 0, 0] - expected)), 1e-8)

    def test_constructed_family_matches_closed_form(self):
        k = 2.0 * np.pi * np.arange(16) / 16
        h = np.stack([(1.0 + 1.3 * np.cos(x)) * SIGMA_1 + 1.3 * np.sin(x) * SIGMA_2
                      for x in k])
        built = SymmetryManager.construct_sls_bdg(h, 5.0, 1.0, self.S)
        self.assertLessEqual(built.max_deviation, 1e-8)
        self.assertAlmostEqual(built.epsilon, self.model.mu_tilde, places=12)
        self.assertAlmostEqual(built.squeeze_parameter.real, self.model.squeeze_r, places=12)
        with self.assertRaises(PreconditionError):
            SymmetryManager.construct_sls_bdg(h + 0.1 * SIGMA_3, 5.0, 1.0, self.S)

    def test_dynamics_inversion_identity(self):
        H = BdgManager.assemble_at(self.bloch, 0)
        for t in (0.3, 1.0):
            with self.subTest(t=t):
                self.assertLessEqual(SymmetryManager.dynamics_inversion_residual(H, self.S, t), 1e-8)


if __name__ == "__main__":
    unittest.main()
