import logging
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config import Tolerances
from src.managers.bdg_manager import BdgManager
from src.managers.chain_manager import ChainManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.managers.spectroscopy_manager import SpectroscopyManager
from src.managers.symmetry_manager import SymmetryManager
from src.managers.topology_manager import TopologyManager
from src.models.bdg import BlochBdg, Boundary, PauliLikeMetrics, PrototypeModel
from src.models.chain import ChainSpec, DisorderKind, EdgeSide
from src.models.experiment import ExperimentConfig, ExperimentKind
from src.models.spectra import StabilityKind
from src.models.spectroscopy import BandSide
from src.models.symmetry import SymmetryOperator
from src.storage.artifact_store import ArtifactSession
from src.utils.config_schema import ConfigSchema, ModelBundle
from src.utils.error_handler import (
    GapClosedError, LabError, PreconditionError, ResolutionError,
)
from src.utils.linalg import max_norm, min_eigenvalue

logger = logging.getLogger(__name__)

Handler = Callable[[ExperimentConfig, ModelBundle, Tolerances, ArtifactSession], Dict[str, Any]]

# 严重程度由低到高
_STABILITY_ORDER = [
    StabilityKind.THERMO_AND_DYNAMICAL, StabilityKind.DYNAMICAL_ONLY,
    StabilityKind.LANDAU_UNSTABLE, StabilityKind.DYNAMICALLY_UNSTABLE,
]


def _prepared_bloch(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances) -> BlochBdg:
    delta = config.params.get('regularization', 0.0)
    if delta:
        return DiagonalizeManager.regularize_bloch(bundle.bloch, delta, tol)
    return bundle.bloch


def _require_prototype(bundle: ModelBundle) -> PrototypeModel:
    if bundle.prototype is None:
        raise PreconditionError("该实验只支持 prototype 模型")
    return bundle.prototype


def _prototype_winding(model: PrototypeModel, tol: Tolerances) -> Optional[int]:
    k = 2.0 * np.pi * np.arange(model.k_points) / model.k_points
    try:
        return TopologyManager.winding_number(model.t1 + model.t2 * np.exp(1j * k), k, tol)
    except GapClosedError:
        return None


class CommandHandlers:
    """子命令处理器：每个方法把产物写入 session 并返回摘要"""

    @staticmethod
    def bands(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
              session: ArtifactSession) -> Dict[str, Any]:
        """E±(k) 能带"""
        bloch = _prepared_bloch(config, bundle, tol)
        bogs = DiagonalizeManager.diagonalize_grid(bloch, tol)
        unstable = [float(k) for k, b in zip(bloch.k_grid, bogs) if b.V is None]
        if unstable:
            raise PreconditionError(f"{len(unstable)} 个 k 点动力学不稳定，请用 stability 子命令诊断")

        n = bloch.n_modes
        header = ['k'] + [f'E_plus_{i}' for i in range(n)] + [f'E_minus_neg_{i}' for i in range(n)]
        rows = [[float(k)] + list(b.E_plus) + list(b.E_minus_neg) for k, b in zip(bloch.k_grid, bogs)]
        session.add_csv('bands.csv', header, rows)

        summary = {
            'label': bloch.label,
            'n_k': bloch.n_k,
            'n_modes': n,
            'regularization': bloch.regularization,
            'stability': sorted({b.stability.value for b in bogs}),
        }
        if bundle.prototype is not None and not bloch.regularization:
            model = bundle.prototype
            q = np.abs(model.t1 + model.t2 * np.exp(1j * bloch.k_grid))
            closed = np.stack([model.mu_tilde - q, model.mu_tilde + q], axis=1)
            numeric = np.stack([np.sort(b.E_plus) for b in bogs])
            summary['max_closed_form_error'] = float(np.max(np.abs(numeric - closed)))
        session.add_json('bands.json', summary)
        return summary

    @staticmethod
    def topology(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
                 session: ArtifactSession) -> Dict[str, Any]:
        """ν, P, P^whole 与 q(k) 轨迹"""
        bloch = _prepared_bloch(config, bundle, tol)
        result = TopologyManager.analyze(bloch, bundle.S_tilde, tol)
        payload = result.to_dict()
        payload.pop('q_trace')
        session.add_json('topology.json', payload)
        session.add_csv('q_trace.csv', ['k', 're_q', 'im_q'],
                        [[float(k), float(q.real), float(q.imag)] for k, q in zip(result.k_grid, result.q_trace)])
        return {'nu': payload['nu'], 'P': payload['P']}

    @staticmethod
    def correlation(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
                    session: ArtifactSession) -> Dict[str, Any]:
        """−Im C_j[ω]、下支包络与分类"""
        base = _require_prototype(bundle)
        params = config.params
        boundary = Boundary(params['boundary'])
        reports = []
        for i, t2 in enumerate(params['t2_values']):
            model = replace(base, t2=t2)
            if params['source'] == 'analytic':
                trace = SpectroscopyManager.correlation_pbc_analytic(model, params['L'], None, params['kappa'])
            else:
                bdg = ChainManager.build_chain(ChainSpec.clean(model, params['L'], boundary))
                trace = SpectroscopyManager.correlation_numeric(
                    bdg, params['j'], None, params['kappa'], boundary, model.mu_tilde, tol,
                )
            session.add_csv(f'correlation_{i:02d}.csv', ['omega', 'minus_im_C'], trace.to_rows())

            entry = {'t2': t2, 'nu': _prototype_winding(model, tol), 'envelope': None}
            if boundary is Boundary.PERIODIC:
                entry['verdict'] = SpectroscopyManager.classify_topology_from_trace(trace, tol).value
                window, _ = SpectroscopyManager.lower_band_window(trace)
                try:
                    entry['envelope'] = SpectroscopyManager.extract_envelope(
                        trace, window, BandSide.LOWER, tol).to_dict()
                except ResolutionError as e:
                    entry['envelope_error'] = e.message
            else:
                entry['midgap_peak'] = SpectroscopyManager.detect_midgap_peak(trace, model.mu_tilde)
            reports.append(entry)
        session.add_json('envelope.json', {'kappa': params['kappa'], 'L': params['L'], 'traces': reports})
        return {'traces': len(reports)}

    @staticmethod
    def obc(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
            session: ArtifactSession) -> Dict[str, Any]:
        """开边界谱扫描、边缘模与开边界关联函数"""
        model = _require_prototype(bundle)
        params = config.params
        spec = ChainSpec.clean(model, params['L'], Boundary.OPEN)

        sweep = ChainManager.obc_spectrum_sweep(spec, params['t2_values'], tol)
        rows = []
        for point in sweep:
            if point.energies is not None:
                rows.extend([point.t2, n, float(e)] for n, e in enumerate(point.energies))
        session.add_csv('obc_spectrum.csv', ['t2', 'index', 'E'], rows)
        session.add_json('obc_sweep.json', {'mu_tilde': model.mu_tilde, 'points': [p.to_dict() for p in sweep]})

        edge_summary: Dict[str, Any] = {'mu_tilde': model.mu_tilde, 't1': model.t1, 't2': model.t2}
        if model.t1 < model.t2:
            modes = [ChainManager.edge_mode_ansatz(spec, side, tol) for side in (EdgeSide.LEFT, EdgeSide.RIGHT)]
            edge_summary['modes'] = []
            for mode in modes:
                entry = mode.to_dict()
                entry['overlap'] = ChainManager.edge_mode_overlap(spec, mode, tol)
                edge_summary['modes'].append(entry)
            session.add_csv(
                'edge_modes.csv', ['site', 'left_particle', 'left_hole', 'right_particle', 'right_hole'],
                [[s, abs(modes[0].amplitudes_particle[s]), abs(modes[0].amplitudes_hole[s]),
                  abs(modes[1].amplitudes_particle[s]), abs(modes[1].amplitudes_hole[s])]
                 for s in range(2 * spec.L)],
            )
            small, large = params['edge_sizes'][0], params['edge_sizes'][-1]
            residuals = [
                ChainManager.edge_mode_ansatz(ChainSpec.clean(model, size), EdgeSide.LEFT, tol).residual
                for size in (small, large)
            ]
            edge_summary['residual_scaling'] = {
                'L': [small, large],
                'ratio': residuals[1] / residuals[0],
                'expected': (model.t1 / model.t2) ** (large - small),
            }
        else:
            edge_summary['modes'] = None
            edge_summary['reason'] = "t1 ≥ t2：平庸相无边缘模"
        session.add_json('edge_modes.json', edge_summary)

        trace = SpectroscopyManager.correlation_numeric(
            ChainManager.build_chain(spec), params['j'], None, params['kappa'],
            Boundary.OPEN, model.mu_tilde, tol,
        )
        session.add_csv('correlation_obc.csv', ['omega', 'minus_im_C'], trace.to_rows())
        midgap = SpectroscopyManager.detect_midgap_peak(trace, model.mu_tilde)
        session.add_json('midgap.json', {'center': model.mu_tilde, 'j': params['j'], 'midgap_peak': midgap})
        return {'sweep_points': len(sweep), 'midgap_peak': midgap}

    @staticmethod
    def disorder(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
                 session: ArtifactSession) -> Dict[str, Any]:
        """跃迁 / 在位能无序系综"""
        model = _require_prototype(bundle)
        params = config.params
        spec = ChainSpec.clean(model, params['L'], Boundary.OPEN)
        summary = {}
        for name in params['kinds']:
            kind = DisorderKind(name)
            ensembles = ChainManager.disorder_ensemble(
                spec, kind, params['D_values'], params['n_samples'], config.seed, tol,
            )
            session.add_json(f'disorder_{name}.json', {
                'mu_tilde': model.mu_tilde,
                'ensembles': [e.to_dict(model.mu_tilde) for e in ensembles],
            })
            session.add_csv(f'disorder_{name}.csv', ['D', 'index', 'mean_E'], [
                [e.strength, n, float(value)] for e in ensembles for n, value in enumerate(e.mean_spectrum)
            ])
            session.add_csv(f'disorder_{name}_edges.csv',
                            ['D', 'sample', 'E_low', 'E_high', 'sublattice_residual'], [
                [e.strength, i, float(e.edge_energies[i, 0]), float(e.edge_energies[i, 1]),
                 float(e.sublattice_residuals[i])]
                for e in ensembles for i in range(e.n_samples)
            ])
            summary[name] = [float(np.mean(e.edge_splittings)) for e in ensembles]
        return {'mean_edge_splitting': summary}

    @staticmethod
    def stability(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
                  session: ArtifactSession) -> Dict[str, Any]:
        """逐 k 稳定性分类"""
        bloch = _prepared_bloch(config, bundle, tol)
        rows, kinds = [], []
        for k, H in zip(bloch.k_grid, BdgManager.assemble_grid(bloch, tol)):
            bog = DiagonalizeManager.bogoliubov_diagonalize(H, tol, bloch.regularization)
            kinds.append(bog.stability)
            min_E = float(np.min(bog.E_plus)) if bog.E_plus.size else float('nan')
            rows.append([float(k), bog.stability.value, min_eigenvalue(H), min_E])
        session.add_csv('stability.csv', ['k', 'stability', 'min_eig_H', 'min_E_plus'], rows)
        overall = max(kinds, key=_STABILITY_ORDER.index)
        counts = {kind.value: kinds.count(kind) for kind in _STABILITY_ORDER if kinds.count(kind)}
        payload = {'overall': overall.value, 'counts': counts, 'regularization': bloch.regularization}
        session.add_json('stability.json', payload)
        return payload

    @staticmethod
    def _operators(config: ExperimentConfig, n: int) -> List[SymmetryOperator]:
        T_tilde = ConfigSchema.parse_matrix(config.params.get('T_tilde'), "T_tilde")
        T_tilde = np.eye(n) if T_tilde is None else T_tilde
        operators = []
        for op in config.params['operators']:
            if op == 'PHS':
                operators.append(SymmetryManager.particle_hole(n))
            elif op == 'TRS':
                operators.append(SymmetryManager.time_reversal(T_tilde))
            elif op == 'chiral':
                operators.append(SymmetryManager.chiral(T_tilde))
            elif isinstance(op, dict):
                matrix = BdgManager.parse_complex_matrix(op['matrix'], f"operators[{op.get('name', '')}]")
                operators.append(SymmetryOperator.from_dict(op, matrix))
        return operators

    @staticmethod
    def symmetry(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
                 session: ArtifactSession) -> Dict[str, Any]:
        """候选对称的残差、隐藏子格对称与压缩映射的对称保持"""
        bloch = bundle.bloch
        params = config.params
        operators = CommandHandlers._operators(config, bloch.n_modes)
        reports = SymmetryManager.check_operators_on_grid(bloch, operators, tol)
        squeezes = DiagonalizeManager.squeeze_grid(bloch, tol)
        payload: Dict[str, Any] = {'operators': [r.to_dict() for r in reports]}

        if params['preservation']:
            payload['preservation'] = [
                SymmetryManager.squeeze_preservation_test(bloch, op, tol, squeezes).to_dict()
                for op, report in zip(operators, reports) if report.holds
            ]

        wants_sublattice = 'sublattice' in params['operators'] or bundle.S_tilde is not None
        if wants_sublattice:
            if bundle.S_tilde is None:
                raise PreconditionError("检查子格对称需要 S_tilde")
            sub = SymmetryManager.check_sublattice(squeezes, bundle.S_tilde, tol)
            payload['sublattice'] = sub.to_dict()
            if sub.holds and params['preservation']:
                op = SymmetryManager.sublattice(bundle.S_tilde)
                payload.setdefault('preservation', []).append(
                    SymmetryManager.squeeze_preservation_test(bloch, op, tol, squeezes).to_dict())
            if sub.holds and params['inversion_times']:
                H = BdgManager.assemble_at(bloch, 0, tol)
                payload['inversion_residuals'] = [
                    {'t': t, 'residual': SymmetryManager.dynamics_inversion_residual(H, bundle.S_tilde, t, tol)}
                    for t in params['inversion_times']
                ]
        session.add_json('symmetry.json', payload)
        return {'holds': {r.name: r.holds for r in reports}}

    @staticmethod
    def reduce(config: ExperimentConfig, bundle: ModelBundle, tol: Tolerances,
               session: ArtifactSession) -> Dict[str, Any]:
        """W 约化的逐 k 校验、形变路径、零能平化与 Williamson 对照"""
        bloch = _prepared_bloch(config, bundle, tol)
        params = config.params
        n = bloch.n_modes
        tau3 = PauliLikeMetrics.for_modes(n).tau3
        H_grid = BdgManager.assemble_grid(bloch, tol)
        squeezes = DiagonalizeManager.squeeze_grid(bloch, tol)
        bogs = DiagonalizeManager.diagonalize_grid(bloch, tol)

        rows = []
        for k, H, sq, bog in zip(bloch.k_grid, H_grid, squeezes, bogs):
            defining = max_norm(sq.exp_W @ sq.exp_W @ H @ sq.exp_W @ sq.exp_W - tau3 @ H @ tau3)
            rows.append([
                float(k), sq.cross_check, abs(float(np.linalg.slogdet(sq.exp_W)[1])),
                max_norm(bog.V.conj().T @ tau3 @ bog.V - tau3), defining, sq.gap_center,
            ])
        session.add_csv('reduce.csv',
                        ['k', 'cross_check', 'abs_log_det_expW', 'pseudo_unitarity', 'defining_relation',
                         'gap_center'], rows)

        deformations = []
        for i in params['k_indices']:
            if not 0 <= i < bloch.n_k:
                raise PreconditionError(f"k 下标 {i} 超出网格")
            entry = {
                'k': float(bloch.k_grid[i]),
                'path': DiagonalizeManager.deformation_path(H_grid[i], squeezes[i], params['lambdas']).to_dict(),
                'chaudhary': DiagonalizeManager.chaudhary_deformation(squeezes[i], params['lambdas']).to_dict(),
            }
            symplectic = DiagonalizeManager.symplectic_eigenvalues(BdgManager.quadrature_form(H_grid[i]), tol)
            expected = bogs[i].E_plus
            if symplectic.size > n:
                expected = np.concatenate([expected, bogs[bloch.minus_index(i)].E_plus])
            entry['williamson_deviation'] = float(np.max(np.abs(symplectic - np.sort(expected))))
            deformations.append(entry)

        try:
            flatten = TopologyManager.flatten_at_zero_energy(bogs, bloch.minus_index, tol)
        except LabError as e:
            logger.warning(f"零能平化未执行: {e.message}")
            flatten = None
        payload = {
            'max_cross_check': max(r[1] for r in rows),
            'max_pseudo_unitarity': max(r[3] for r in rows),
            'flatten_deviation': flatten,
            'deformations': deformations,
            'regularization': bloch.regularization,
        }
        session.add_json('reduce.json', payload)
        return {'max_cross_check': payload['max_cross_check'], 'flatten_deviation': flatten}

    @staticmethod
    def get_command_handlers() -> Dict[str, Handler]:
        """获取子命令到处理器的映射"""
        return {
            ExperimentKind.BANDS.value: CommandHandlers.bands,
            ExperimentKind.WINDING.value: CommandHandlers.topology,
            ExperimentKind.POLARIZATION.value: CommandHandlers.topology,
            ExperimentKind.CORRELATION.value: CommandHandlers.correlation,
            ExperimentKind.OBC.value: CommandHandlers.obc,
            ExperimentKind.DISORDER.value: CommandHandlers.disorder,
            ExperimentKind.STABILITY.value: CommandHandlers.stability,
            ExperimentKind.SYMMETRY.value: CommandHandlers.symmetry,
            ExperimentKind.REDUCE.value: CommandHandlers.reduce,
        }
