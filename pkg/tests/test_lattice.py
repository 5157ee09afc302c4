import unittest

import numpy as np

from src.managers.chain_manager import ChainManager, sample_generator
from src.models.bdg import Boundary, PrototypeModel
from src.models.chain import ChainSpec, DisorderKind, EdgeSide
from src.utils.error_handler import (
    DelocalizedEdgeError, PreconditionError, StructuralValidationError, ValidationError,
)
from src.utils.resource_manager import resource_manager

TOPOLOGICAL = PrototypeModel(mu=5.0, t1=1.0, t2=1.3, xi_abs=1.0)
TRIVIAL = PrototypeModel(mu=5.0, t1=1.0, t2=0.7, xi_abs=1.0)


class BuildChainTests(unittest.TestCase):
    def test_bonds_and_pairing_signs(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 4)
        chain = ChainManager.build_chain(spec)
        K, M = chain.K_mat, chain.M_mat
        self.assertEqual(chain.n_sites, 8)
        self.assertEqual(K[0, 1], 1.0)
        self.assertEqual(K[1, 2], 1.3)
        self.assertEqual(K[2, 1], 1.3)
        self.assertEqual(K[0, 7], 0.0)
        self.assertTrue(np.allclose(np.diag(K), 5.0))
        self.assertTrue(np.allclose(np.diag(M), np.tile([1.0, -1.0], 4)))

    def test_periodic_wrap_bond(self):
        chain = ChainManager.build_chain(ChainSpec.clean(TOPOLOGICAL, 4, Boundary.PERIODIC))
        self.assertEqual(chain.K_mat[7, 0], 1.3)
        self.assertEqual(chain.K_mat[0, 7], 1.3)

    def test_validation(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 4)
        for bad in (
            spec.with_couplings((1.0,) * 3, (1.3,) * 3),
            spec.with_couplings((1.0,) * 4, (1.3,) * 4),
            spec.with_couplings((1.0, -1.0, 1.0, 1.0), (1.3,) * 3),
            ChainSpec.clean(PrototypeModel(mu=5.0, t1=1.0, t2=1.3, xi_abs=1.0), 1, Boundary.PERIODIC),
        ):
            with self.assertRaises(StructuralValidationError):
                ChainManager.build_chain(bad)


class CleanEdgeModeTests(unittest.TestCase):
    def setUp(self):
        self.spec = ChainSpec.clean(TOPOLOGICAL, 100)

    def test_two_midgap_modes(self):
        _, bog = ChainManager.diagonalize_chain(self.spec)
        near = np.abs(bog.E_plus - TOPOLOGICAL.mu_tilde) <= 1e-6
        self.assertEqual(int(np.sum(near)), 2)

    def test_ansatz_matches_numerical_modes(self):
        for side in EdgeSide:
            with self.subTest(side=side):
                mode = ChainManager.edge_mode_ansatz(self.spec, side)
                self.assertAlmostEqual(mode.energy, TOPOLOGICAL.mu_tilde, places=8)
                self.assertAlmostEqual(mode.envelope_ratio, 1.3, places=12)
                self.assertGreaterEqual(ChainManager.edge_mode_overlap(self.spec, mode), 1.0 - 1e-8)

    def test_residual_decays_with_length(self):
        short = ChainManager.edge_mode_ansatz(ChainSpec.clean(TOPOLOGICAL, 20), EdgeSide.LEFT)
        long = ChainManager.edge_mode_ansatz(ChainSpec.clean(TOPOLOGICAL, 30), EdgeSide.LEFT)
        expected = (1.0 / 1.3) ** 10
        ratio = long.residual / short.residual
        self.assertGreater(ratio, expected / 3.0)
        self.assertLess(ratio, expected * 3.0)

    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            ChainManager.edge_mode_ansatz(ChainSpec.clean(TRIVIAL, 20), EdgeSide.LEFT)
        with self.assertRaises(PreconditionError):
            ChainManager.edge_mode_ansatz(ChainSpec.clean(TOPOLOGICAL, 20, Boundary.PERIODIC), EdgeSide.LEFT)
        disordered = self.spec.with_offsets(np.full(200, 0.01))
        with self.assertRaises(PreconditionError):
            ChainManager.edge_mode_ansatz(disordered, EdgeSide.LEFT)


class SpectrumSweepTests(unittest.TestCase):
    def test_midgap_counts(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 40)
        points = ChainManager.obc_spectrum_sweep(spec, [0.7, 1.0, 1.3])
        self.assertEqual([p.t2 for p in points], [0.7, 1.0, 1.3])
        self.assertEqual(len(points[0].midgap), 0)
        self.assertTrue(points[1].critical)
        self.assertIsNone(points[1].to_dict()['n_midgap'])
        self.assertEqual(points[2].to_dict()['n_midgap'], 2)
        self.assertTrue(all(p.energies.shape == (80,) for p in points))


class DisorderedEdgeTests(unittest.TestCase):
    def test_clean_chain_reproduces_closed_form(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 30)
        left, right = ChainManager.disordered_edge_ansatz(spec)
        self.assertAlmostEqual(left.residual, ChainManager.edge_mode_ansatz(spec, EdgeSide.LEFT).residual, places=12)
        self.assertAlmostEqual(right.residual, ChainManager.edge_mode_ansatz(spec, EdgeSide.RIGHT).residual, places=12)

    def test_hopping_sample_stays_at_gap_center(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 50)
        drawn, _ = ChainManager.draw_disorder(spec, DisorderKind.HOPPING, 0.2, sample_generator(0, DisorderKind.HOPPING, 0.2, 0))
        left, _ = ChainManager.disordered_edge_ansatz(drawn)
        self.assertAlmostEqual(left.energy, TOPOLOGICAL.mu_tilde, places=6)
        self.assertLess(left.residual, 1e-3)

    def test_preconditions(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 20)
        with self.assertRaises(PreconditionError):
            ChainManager.disordered_edge_ansatz(spec.with_offsets(np.full(40, 0.05)))
        with self.assertRaises(DelocalizedEdgeError):
            ChainManager.disordered_edge_ansatz(ChainSpec.clean(TRIVIAL, 20))


class DisorderEnsembleTests(unittest.TestCase):
    def tearDown(self):
        resource_manager.set_max_workers(None)

    def test_sample_generator_is_deterministic(self):
        a = sample_generator(7, DisorderKind.HOPPING, 0.1, 3).uniform(size=5)
        b = sample_generator(7, DisorderKind.HOPPING, 0.1, 3).uniform(size=5)
        c = sample_generator(7, DisorderKind.HOPPING, 0.1, 4).uniform(size=5)
        d = sample_generator(7, DisorderKind.ONSITE, 0.1, 3).uniform(size=5)
        self.assertTrue(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))
        self.assertFalse(np.array_equal(a, d))

    def test_hopping_versus_onsite(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 50)
        center = TOPOLOGICAL.mu_tilde
        hopping, = ChainManager.disorder_ensemble(spec, DisorderKind.HOPPING, [0.3], n_samples=100, seed=0)
        onsite, = ChainManager.disorder_ensemble(spec, DisorderKind.ONSITE, [0.3], n_samples=100, seed=0)
        self.assertEqual(hopping.spectra.shape, (100, 100))
        self.assertLessEqual(hopping.max_edge_deviation(center), 1e-3)
        self.assertLessEqual(float(np.max(hopping.sublattice_residuals)), 1e-9)
        self.assertGreater(float(np.max(onsite.sublattice_residuals)), 1e-6)
        self.assertGreaterEqual(np.mean(onsite.edge_splittings), 10.0 * np.mean(hopping.edge_splittings))

    def test_result_independent_of_worker_count(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 20)
        resource_manager.set_max_workers(1)
        serial, = ChainManager.disorder_ensemble(spec, DisorderKind.HOPPING, [0.2], n_samples=12, seed=5)
        resource_manager.set_max_workers(4)
        parallel, = ChainManager.disorder_ensemble(spec, DisorderKind.HOPPING, [0.2], n_samples=12, seed=5)
        self.assertTrue(np.array_equal(serial.spectra, parallel.spectra))
        self.assertTrue(np.array_equal(serial.edge_energies, parallel.edge_energies))

    def test_invalid_arguments(self):
        spec = ChainSpec.clean(TOPOLOGICAL, 10)
        with self.assertRaises(ValidationError):
            ChainManager.disorder_ensemble(spec, DisorderKind.ONSITE, [0.1], n_samples=0)
        with self.assertRaises(ValidationError):
            ChainManager.disorder_ensemble(spec, DisorderKind.ONSITE, [-0.1], n_samples=2)


if __name__ == "__main__":
    unittest.main()
