import contextlib
import io
import json
import os
import tempfile
import unittest
from pathlib import Path

from app import main
from src.utils.error_handler import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION

PRESETS = Path(__file__).resolve().parent.parent / 'presets'


def _model(t2, k_points=41):
    return {"model": "prototype", "mu": 5.0, "t1": 1.0, "t2": t2, "xi_abs": 1.0, "k_points": k_points}


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_config(self, name, data):
        path = self.tmp / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return str(path)

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def read_json(self, directory, name):
        return json.loads((Path(directory) / name).read_text(encoding='utf-8'))


class BasicRunTests(CliTestCase):
    def test_bands_on_topological_preset(self):
        out_dir = self.tmp / 'bands'
        code, stdout, _ = self.run_cli('bands', '--config', str(PRESETS / 'proto_topo.json'),
                                       '--output-dir', str(out_dir))
        self.assertEqual(code, EXIT_OK)
        self.assertTrue((out_dir / 'bands.csv').exists())
        self.assertIn(str(out_dir / 'bands.csv'), stdout)
        summary = self.read_json(out_dir, 'bands.json')
        self.assertLessEqual(summary['max_closed_form_error'], 1e-10)
        manifest = self.read_json(out_dir, 'manifest.json')
        self.assertEqual(manifest['experiment'], 'bands')
        self.assertEqual(manifest['model']['t2'], 1.3)
        self.assertEqual(manifest['output_dir'], str(out_dir))

    def test_winding_on_trivial_preset(self):
        out_dir = self.tmp / 'winding'
        code, _, _ = self.run_cli('winding', '--config', str(PRESETS / 'proto_triv.json'),
                                  '--output-dir', str(out_dir))
        self.assertEqual(code, EXIT_OK)
        topology = self.read_json(out_dir, 'topology.json')
        self.assertEqual(topology['nu'], 0)
        self.assertEqual(topology['P'], 0.0)
        self.assertTrue((out_dir / 'q_trace.csv').exists())

    def test_polarization_on_topological_preset(self):
        out_dir = self.tmp / 'polarization'
        code, _, _ = self.run_cli('polarization', '--config', str(PRESETS / 'proto_topo.json'),
                                  '--output-dir', str(out_dir))
        self.assertEqual(code, EXIT_OK)
        topology = self.read_json(out_dir, 'topology.json')
        self.assertEqual(topology['nu'], 1)
        self.assertAlmostEqual(topology['P'], 0.5, places=8)


class FailureTests(CliTestCase):
    def test_unknown_key_is_a_validation_failure(self):
        config = self.write_config('bad.json', {"model": _model(1.3), "params": {"colour": 1}})
        out_dir = self.tmp / 'bad'
        code, _, stderr = self.run_cli('bands', '--config', config, '--output-dir', str(out_dir))
        self.assertEqual(code, EXIT_VALIDATION)
        self.assertTrue(stderr)
        self.assertFalse(out_dir.exists())

    def test_critical_point_is_a_numerical_failure(self):
        config = self.write_config('critical.json', {"model": _model(1.0, k_points=201)})
        out_dir = self.tmp / 'critical'
        code, stdout, _ = self.run_cli('winding', '--config', config, '--output-dir', str(out_dir))
        self.assertEqual(code, EXIT_NUMERICAL)
        self.assertEqual(stdout, '')
        self.assertFalse(out_dir.exists())

    def test_kappa_override_requires_kappa_param(self):
        code, _, _ = self.run_cli('bands', '--config', str(PRESETS / 'proto_topo.json'),
                                  '--kappa', '0.01', '--output-dir', str(self.tmp / 'kappa'))
        self.assertEqual(code, EXIT_VALIDATION)

    def test_missing_config_file(self):
        code, _, _ = self.run_cli('bands', '--config', str(self.tmp / 'nope.json'))
        self.assertEqual(code, EXIT_VALIDATION)


class DeterminismTests(CliTestCase):
    def test_disorder_runs_are_byte_identical(self):
        config = self.write_config('disorder.json', {
            "model": _model(1.3),
            "seed": 3,
            "params": {"L": 10, "D_values": [0.1, 0.2], "n_samples": 6},
        })
        first, second = self.tmp / 'first', self.tmp / 'second'
        self.assertEqual(self.run_cli('disorder', '--config', config, '--output-dir', str(first))[0], EXIT_OK)
        self.assertEqual(self.run_cli('disorder', '--config', config, '--output-dir', str(second))[0], EXIT_OK)
        names = sorted(os.listdir(first))
        self.assertEqual(names, sorted(os.listdir(second)))
        self.assertIn('disorder_onsite_edges.csv', names)
        for name in names:
            if name == 'manifest.json':
                continue
            with self.subTest(artifact=name):
                self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

    def test_seed_override_changes_samples(self):
        config = self.write_config('disorder.json', {
            "model": _model(1.3), "params": {"L": 8, "kinds": ["onsite"], "D_values": [0.2], "n_samples": 3},
        })
        a, b = self.tmp / 'a', self.tmp / 'b'
        self.run_cli('disorder', '--config', config, '--output-dir', str(a), '--seed', '1')
        self.run_cli('disorder', '--config', config, '--output-dir', str(b), '--seed', '2')
        self.assertEqual(self.read_json(a, 'manifest.json')['seed'], 1)
        self.assertNotEqual((a / 'disorder_onsite.csv').read_bytes(), (b / 'disorder_onsite.csv').read_bytes())


class SubcommandSmokeTests(CliTestCase):
    def _run(self, command, data, *extra):
        out_dir = self.tmp / command
        code, _, stderr = self.run_cli(command, '--config', self.write_config(f'{command}.json', data),
                                       '--output-dir', str(out_dir), *extra)
        self.assertEqual(code, EXIT_OK, stderr)
        return out_dir

    def test_symmetry(self):
        out_dir = self._run('symmetry', {
            "model": _model(1.3, k_points=21),
            "params": {"operators": ["PHS", "TRS", "chiral", "sublattice"], "inversion_times": [0.5]},
        })
        payload = self.read_json(out_dir, 'symmetry.json')
        self.assertTrue(all(op['holds'] for op in payload['operators']))
        self.assertTrue(payload['sublattice']['holds'])
        self.assertLessEqual(payload['inversion_residuals'][0]['residual'], 1e-8)
        self.assertEqual(len(payload['preservation']), 4)

    def test_reduce(self):
        out_dir = self._run('reduce', {"model": _model(1.3, k_points=21), "params": {"k_indices": [0, 10]}})
        payload = self.read_json(out_dir, 'reduce.json')
        self.assertLessEqual(payload['max_cross_check'], 1e-8)
        self.assertLessEqual(payload['max_pseudo_unitarity'], 1e-10)
        self.assertLessEqual(payload['flatten_deviation'], 1e-10)
        for entry in payload['deformations']:
            self.assertLessEqual(entry['williamson_deviation'], 1e-8)

    def test_stability(self):
        out_dir = self._run('stability', {"model": _model(1.3, k_points=21)})
        self.assertEqual(self.read_json(out_dir, 'stability.json')['counts'], {'ThermoAndDynamical': 21})

    def test_obc(self):
        out_dir = self._run('obc', {
            "model": _model(1.3),
            "params": {"L": 30, "t2_values": [0.7, 1.3], "edge_sizes": [10, 14]},
        })
        sweep = self.read_json(out_dir, 'obc_sweep.json')
        self.assertEqual([p['n_midgap'] for p in sweep['points']], [0, 2])
        edges = self.read_json(out_dir, 'edge_modes.json')
        self.assertTrue(all(m['overlap'] >= 1.0 - 1e-6 for m in edges['modes']))
        self.assertIsNotNone(self.read_json(out_dir, 'midgap.json')['midgap_peak'])

    def test_correlation_with_kappa_override(self):
        out_dir = self._run('correlation', {
            "model": _model(1.3), "params": {"t2_values": [0.7, 1.3]},
        }, '--kappa', '0.006')
        envelope = self.read_json(out_dir, 'envelope.json')
        self.assertEqual(envelope['kappa'], 0.006)
        self.assertEqual([t['verdict'] for t in envelope['traces']], ['Trivial', 'Topological'])
        self.assertTrue((out_dir / 'correlation_01.csv').exists())


if __name__ == "__main__":
    unittest.main()
