"""实空间原型链：组装、开边界谱扫描、边缘模解析解与无序系综"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import Config, Tolerances
from src.managers.bdg_manager import BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.managers.symmetry_manager import SymmetryManager
from src.models.bdg import Boundary, RealSpaceBdg
from src.models.chain import ChainSpec, DisorderEnsemble, DisorderKind, EdgeMode, EdgeSide, SweepPoint
from src.models.spectra import BogoliubovResult
from src.utils.error_handler import (
    DelocalizedEdgeError, LabError, PreconditionError, ValidationError,
)
from src.utils.memory_monitor import dense_stack_bytes, memory_monitor
from src.utils.resource_manager import resource_manager

logger = logging.getLogger(__name__)

# 随机流编号
_KIND_CODES = {DisorderKind.HOPPING: 1, DisorderKind.ONSITE: 2}
# 判定 t2 = t1 临界点的相对阈值
CRITICAL_THRESHOLD = 1e-9


def sample_generator(seed: int, kind: DisorderKind, strength: float, index: int) -> np.random.Generator:
    """样本 i 的独立计数器随机流，与执行顺序无关"""
    key = (_KIND_CODES[kind], int(round(strength * 1e12)), int(index))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


class ChainManager:
    """原型链实验"""

    @staticmethod
    def build_chain(spec: ChainSpec) -> RealSpaceBdg:
        """A_j = 2j, B_j = 2j+1；胞内键 (2j, 2j+1)，胞间键 (2j+1, 2j+2)"""
        spec.validate()
        n = 2 * spec.L
        K = np.diag(spec.mu + np.asarray(spec.onsite_offsets, dtype=float)).astype(complex)
        for j, t in enumerate(spec.t_intra):
            K[2 * j, 2 * j + 1] = K[2 * j + 1, 2 * j] = t
        for j, t in enumerate(spec.t_inter):
            a, b = 2 * j + 1, (2 * j + 2) % n
            K[a, b] = K[b, a] = t
        signs = np.tile([1.0, -1.0], spec.L)
        M = np.diag(spec.xi * signs)
        return RealSpaceBdg(n_sites=n, K_mat=K, M_mat=M, boundary=spec.boundary, sites_per_cell=2)

    @staticmethod
    def sublattice_matrix(L: int) -> np.ndarray:
        """S̃ = diag(+1 on A, −1 on B)"""
        return np.diag(np.tile([1.0, -1.0], L)).astype(complex)

    @staticmethod
    def diagonalize_chain(spec: ChainSpec, tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, BogoliubovResult]:
        tol = tol or Config.tolerances()
        H = BdgManager.assemble_real_space(ChainManager.build_chain(spec), tol)
        return H, DiagonalizeManager.bogoliubov_diagonalize(H, tol)

    @staticmethod
    def _bulk_gap(spec: ChainSpec) -> Tuple[float, float]:
        """干净链能隙 (μ̃ − |t1−t2|, μ̃ + |t1−t2|)"""
        half = abs(spec.t_intra[0] - spec.t_inter[0]) if spec.t_inter else 0.0
        return spec.mu_tilde - half, spec.mu_tilde + half

    @staticmethod
    def obc_spectrum_sweep(spec: ChainSpec, t2_values: Sequence[float],
                           tol: Optional[Tolerances] = None) -> List[SweepPoint]:
        """对每个 t2 求开边界正支谱，单点失败记入结果后继续"""
        tol = tol or Config.tolerances()
        t1 = spec.t_intra[0]
        n_inter = spec.L if spec.boundary is Boundary.PERIODIC else spec.L - 1

        def run(t2: float) -> SweepPoint:
            t2 = float(t2)
            critical = abs(t2 - t1) <= CRITICAL_THRESHOLD * t1
            try:
                point_spec = spec.with_couplings((t1,) * spec.L, (t2,) * n_inter)
                _, bog = ChainManager.diagonalize_chain(point_spec, tol)
            except LabError as e:
                logger.warning(f"t2={t2} 处对角化失败: {e.message}")
                return SweepPoint(t2=t2, energies=None, critical=critical, error=e.message)
            if not bog.stability.is_dynamically_stable:
                return SweepPoint(t2=t2, energies=None, critical=critical, error=bog.stability.value)
            energies = np.sort(bog.E_plus)
            midgap = []
            if not critical:
                half = 0.5 * abs(t2 - t1)
                midgap = [float(e) for e in energies if abs(e - spec.mu_tilde) < half]
            return SweepPoint(t2=t2, energies=energies, midgap=midgap, critical=critical)

        return resource_manager.map_ordered(run, list(t2_values), "obc_sweep")

    # ---------- 边缘模 ----------

    @staticmethod
    def _is_clean(spec: ChainSpec) -> bool:
        return (len(set(spec.t_intra)) == 1 and len(set(spec.t_inter)) <= 1
                and not spec.has_onsite_disorder)

    @staticmethod
    def _edge_vector(spec: ChainSpec, side: EdgeSide, envelope: np.ndarray,
                     hole_envelope: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """粒子 cosh r·u，空穴 ±e^{−iφ} sinh r·u（A 子格取 +，B 取 −）"""
        n = 2 * spec.L
        r = spec.squeeze_r
        hole_envelope = envelope if hole_envelope is None else hole_envelope
        offset, sign = (0, 1.0) if side is EdgeSide.LEFT else (1, -1.0)
        particle = np.zeros(n, dtype=complex)
        hole = np.zeros(n, dtype=complex)
        particle[offset::2] = np.cosh(r) * envelope
        hole[offset::2] = sign * np.exp(-1j * spec.xi_phase) * np.sinh(r) * hole_envelope
        return particle, hole

    @staticmethod
    def _score(spec: ChainSpec, particle: np.ndarray, hole: np.ndarray,
               tol: Tolerances) -> Tuple[np.ndarray, np.ndarray, float, float]:
        """τ3 归一化后返回 (粒子, 空穴, 能量, 残差 ‖H_τ v − μ̃ v‖)"""
        H = BdgManager.assemble_real_space(ChainManager.build_chain(spec), tol)
        H_tau = BdgManager.dynamical_matrix(H)
        norm = float(np.vdot(particle, particle).real - np.vdot(hole, hole).real)
        v = np.concatenate([particle, hole]) / np.sqrt(abs(norm))
        half = v.size // 2
        tau3_norm = float(np.vdot(v[:half], v[:half]).real - np.vdot(v[half:], v[half:]).real)
        energy = float(np.vdot(v, H @ v).real / tau3_norm)
        residual = float(np.linalg.norm(H_tau @ v - spec.mu_tilde * v))
        return v[:half], v[half:], energy, residual

    @staticmethod
    def edge_mode_ansatz(spec: ChainSpec, side: EdgeSide,
                         tol: Optional[Tolerances] = None) -> EdgeMode:
        """干净链拓扑相的解析边缘模，包络 δ^{j−1}，δ = −t1/t2"""
        tol = tol or Config.tolerances()
        spec.validate()
        if spec.boundary is not Boundary.OPEN:
            raise PreconditionError("边缘模只在开边界下存在")
        if not ChainManager._is_clean(spec):
            raise PreconditionError("edge_mode_ansatz 只接受干净链，无序链请用 disordered_edge_ansatz")
        t1, t2 = spec.t_intra[0], (spec.t_inter[0] if spec.t_inter else 0.0)
        if not t1 < t2:
            raise PreconditionError(f"t1={t1} ≥ t2={t2}：平庸相没有边缘模")
        delta = -t1 / t2
        cells = np.arange(spec.L)
        envelope = delta ** cells if side is EdgeSide.LEFT else delta ** (spec.L - 1 - cells)
        return ChainManager._edge_mode(spec, side, envelope, tol)

    @staticmethod
    def _edge_mode(spec: ChainSpec, side: EdgeSide, envelope: np.ndarray,
                   tol: Tolerances) -> EdgeMode:
        particle, hole = ChainManager._edge_vector(spec, side, envelope)
        particle, hole, energy, residual = ChainManager._score(spec, particle, hole, tol)

        flat = np.ones_like(envelope)
        alt_p, alt_h = ChainManager._edge_vector(spec, side, envelope, hole_envelope=flat)
        _, _, _, alt_residual = ChainManager._score(spec, alt_p, alt_h, tol)

        ordered = envelope if side is EdgeSide.LEFT else envelope[::-1]
        ratio = float(abs(ordered[0]) / abs(ordered[1])) if ordered.size > 1 and ordered[1] != 0 else float('nan')
        return EdgeMode(
            side=side, energy=energy, amplitudes_particle=particle, amplitudes_hole=hole,
            residual=residual, alt_residual=alt_residual, envelope_ratio=ratio,
        )

    @staticmethod
    def edge_mode_overlap(spec: ChainSpec, mode: EdgeMode,
                          tol: Optional[Tolerances] = None) -> float:
        """ansatz 在数值中隙子空间（最靠近 μ̃ 的两个正模）上的投影长度"""
        tol = tol or Config.tolerances()
        _, bog = ChainManager.diagonalize_chain(spec, tol)
        if bog.V is None:
            raise PreconditionError("链动力学不稳定，无法比较边缘模")
        nearest = np.argsort(np.abs(bog.E_plus - spec.mu_tilde), kind='stable')[:2]
        Q = bog.V[:, nearest]
        n = bog.n_modes
        tau3 = np.r_[np.ones(n), -np.ones(n)]
        coefficients = Q.conj().T @ (tau3 * mode.vector)
        return float(np.sqrt(np.sum(np.abs(coefficients) ** 2)))

    @staticmethod
    def disordered_edge_ansatz(spec: ChainSpec,
                               tol: Optional[Tolerances] = None) -> Tuple[EdgeMode, EdgeMode]:
        """跃迁无序下的乘积形式振幅：u_{j+1} = −t_intra[j]/t_inter[j]·u_j"""
        tol = tol or Config.tolerances()
        spec.validate()
        if spec.has_onsite_disorder:
            raise PreconditionError("乘积形式的边缘模只适用于跃迁无序，链上存在在位能无序")
        if spec.boundary is not Boundary.OPEN:
            raise PreconditionError("边缘模只在开边界下存在")
        t_intra, t_inter = np.array(spec.t_intra), np.array(spec.t_inter)

        left = np.ones(spec.L)
        for j in range(spec.L - 1):
            left[j + 1] = -t_intra[j] / t_inter[j] * left[j]
        right = np.ones(spec.L)
        for j in range(spec.L - 1, 0, -1):
            right[j - 1] = -t_intra[j] / t_inter[j - 1] * right[j]

        for tail in (left[-1], right[0]):
            if spec.L > 1 and abs(tail) >= 1.0:
                raise DelocalizedEdgeError(abs(tail))
        return (ChainManager._edge_mode(spec, EdgeSide.LEFT, left, tol),
                ChainManager._edge_mode(spec, EdgeSide.RIGHT, right, tol))

    # ---------- 无序系综 ----------

    @staticmethod
    def draw_disorder(spec: ChainSpec, kind: DisorderKind, strength: float,
                      rng: np.random.Generator) -> Tuple[ChainSpec, int]:
        """均匀分布 [−D, D]；非正耦合重抽，返回 (样本, 重抽次数)"""
        if kind is DisorderKind.ONSITE:
            offsets = rng.uniform(-strength, strength, size=2 * spec.L)
            return spec.with_offsets(offsets), 0
        rejected = 0
        drawn = []
        for t in spec.t_intra + spec.t_inter:
            value = t + rng.uniform(-strength, strength)
            while value <= 0.0:
                rejected += 1
                value = t + rng.uniform(-strength, strength)
            drawn.append(value)
        return spec.with_couplings(drawn[:spec.L], drawn[spec.L:]), rejected

    @staticmethod
    def disorder_ensemble(spec: ChainSpec, kind: DisorderKind, D_values: Sequence[float],
                          n_samples: int = Config.DEFAULT_SAMPLES, seed: int = Config.DEFAULT_SEED,
                          tol: Optional[Tolerances] = None) -> List[DisorderEnsemble]:
        """每个 D 抽 n_samples 条链，平均排序后的正支谱并收集最靠近 μ̃ 的两个本征值"""
        tol = tol or Config.tolerances()
        if n_samples < 1:
            raise ValidationError("n_samples 必须 ≥ 1")
        if any(D < 0 for D in D_values):
            raise ValidationError("无序强度 D 必须 ≥ 0")
        if spec.has_onsite_disorder or not ChainManager._is_clean(spec):
            raise PreconditionError("系综需要干净链作为模板")
        spec.validate()
        gap_low, gap_high = ChainManager._bulk_gap(spec)
        memory_monitor.check_allocation(
            f"disorder_{kind.value}", resource_manager.max_workers * dense_stack_bytes(4, 4 * spec.L))
        S_tilde = ChainManager.sublattice_matrix(spec.L)

        ensembles = []
        for D in D_values:
            D = float(D)

            def sample(i: int):
                rng = sample_generator(seed, kind, D, i)
                drawn, rejected = ChainManager.draw_disorder(spec, kind, D, rng)
                H, bog = ChainManager.diagonalize_chain(drawn, tol)
                if bog.V is None:
                    raise PreconditionError(f"样本 {i} 动力学不稳定")
                energies = np.sort(bog.E_plus)
                nearest = np.sort(energies[np.argsort(np.abs(energies - spec.mu_tilde), kind='stable')[:2]])
                inside = bool(np.all((nearest > gap_low) & (nearest < gap_high)))
                K_tilde = DiagonalizeManager.compute_W(H, tol).K_tilde
                _, residual = SymmetryManager.sublattice_residual(K_tilde, S_tilde)
                return energies, nearest, inside, rejected, residual

            results = resource_manager.map_ordered(sample, list(range(n_samples)), f"disorder_{kind.value}")
            spectra = np.stack([r[0] for r in results])
            rejected = int(sum(r[3] for r in results))
            if rejected:
                logger.warning(f"D={D}: 共重抽 {rejected} 次非正耦合")
            ensemble = DisorderEnsemble(
                n_samples=n_samples, strength=D, kind=kind, seed=seed,
                mean_spectrum=spectra.mean(axis=0),
                edge_energies=np.stack([r[1] for r in results]),
                spectra=spectra,
                edge_flags=np.array([r[2] for r in results]),
                rejected_draws=rejected,
                sublattice_residuals=np.array([r[4] for r in results]),
            )
            logger.info(
                f"系综完成: kind={kind.value}, D={D}, 平均边缘劈裂 {np.mean(ensemble.edge_splittings):.3e}"
            )
            ensembles.append(ensemble)
        return ensembles
