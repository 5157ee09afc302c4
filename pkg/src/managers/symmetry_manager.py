"""对称性检查：TRS / PHS / 手征 / 隐藏子格，子格对称 BdG 族的构造与压缩映射的对称保持"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from config import Config, Tolerances
from src.managers.bdg_manager import BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.models.bdg import BlochBdg, PauliLikeMetrics
from src.models.spectra import SqueezeDecomposition
from src.models.symmetry import (
    PreservationReport, SlsConstruction, SublatticeReport, SymmetryKind, SymmetryOperator, SymmetryReport,
)
from src.utils.error_handler import (
    CrossCheckError, PreconditionError, StructuralValidationError, SymmetryValidationError, ValidationError,
)
from src.utils.linalg import expm_herm, max_norm
from src.utils.resource_manager import resource_manager

logger = logging.getLogger(__name__)


def _minus_indices(n_k: int, k_grid: Optional[np.ndarray]) -> np.ndarray:
    """k → −k 的下标映射；网格必须关于 k → −k 对称"""
    if k_grid is None:
        return (-np.arange(n_k)) % n_k
    k_grid = np.asarray(k_grid, dtype=float)
    indices = np.empty(n_k, dtype=int)
    for i, k in enumerate(k_grid):
        target = (-k) % (2.0 * np.pi)
        distance = np.abs((k_grid - target + np.pi) % (2.0 * np.pi) - np.pi)
        j = int(np.argmin(distance))
        if distance[j] > 1e-9:
            raise StructuralValidationError("网格缺少 −k 配对点", k=float(k))
        indices[i] = j
    return indices


class SymmetryManager:
    """对称性检查器（无状态）"""

    # ---------- 常用对称操作 ----------

    @staticmethod
    def particle_hole(n_modes: int) -> SymmetryOperator:
        """𝒞 = τ1：反幺正，η=−，k → −k"""
        return SymmetryOperator(
            O=PauliLikeMetrics.for_modes(n_modes).tau1, antiunitary=True, eta=-1, eps_k=-1,
            kind=SymmetryKind.PARTICLE_HOLE, name="C=tau1",
        )

    @staticmethod
    def time_reversal(T_tilde: np.ndarray) -> SymmetryOperator:
        """𝒯 = T̃ ⊕ T̃*：反幺正，η=+，k → −k"""
        T_tilde = np.asarray(T_tilde, dtype=complex)
        return SymmetryOperator(
            O=la.block_diag(T_tilde, T_tilde.conj()), antiunitary=True, eta=1, eps_k=-1,
            kind=SymmetryKind.TIME_REVERSAL, name="T",
        )

    @staticmethod
    def chiral(T_tilde: np.ndarray) -> SymmetryOperator:
        """Γ = 𝒯𝒞 的幺正部分：幺正，η=−，k 不变"""
        T_tilde = np.asarray(T_tilde, dtype=complex)
        n = T_tilde.shape[0]
        O = la.block_diag(T_tilde, T_tilde.conj()) @ PauliLikeMetrics.for_modes(n).tau1
        return SymmetryOperator(O=O, antiunitary=False, eta=-1, eps_k=1,
                                kind=SymmetryKind.CHIRAL, name="Gamma")

    @staticmethod
    def sublattice(S_tilde: np.ndarray) -> SymmetryOperator:
        """𝒮 = S̃ ⊕ S̃*：与 τ3 对易的幺正操作"""
        S_tilde = np.asarray(S_tilde, dtype=complex)
        return SymmetryOperator(
            O=la.block_diag(S_tilde, S_tilde.conj()), antiunitary=False, eta=-1, eps_k=1,
            kind=SymmetryKind.SUBLATTICE, name="S",
        )

    # ---------- 校验 ----------

    @staticmethod
    def validate_operator(op: SymmetryOperator, tol: Optional[Tolerances] = None) -> None:
        """幺正性、η/ε 取值以及与 τ3 的（反）对易关系"""
        tol = tol or Config.tolerances()
        O = op.O
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise SymmetryValidationError("对称操作必须是方阵")
        if op.eta not in (1, -1) or op.eps_k not in (1, -1):
            raise SymmetryValidationError("η 与 ε_k 只能取 ±1")
        if max_norm(O.conj().T @ O - np.eye(O.shape[0])) > tol.tol_pu:
            raise SymmetryValidationError(f"{op.name or op.kind.value} 非幺正")
        if op.kind is SymmetryKind.SUBLATTICE or O.shape[0] % 2:
            return
        tau3 = PauliLikeMetrics.for_modes(O.shape[0] // 2).tau3
        # 反幺正时共轭不改变 τ3
        if max_norm(O @ tau3 - op.eta * tau3 @ O) > tol.tol_pu:
            raise SymmetryValidationError(
                f"{op.name or op.kind.value} 不满足 Oτ3 = {op.eta:+d}τ3O"
            )

    @staticmethod
    def validate_sublattice_matrix(S_tilde: np.ndarray, tol: Optional[Tolerances] = None) -> np.ndarray:
        """S̃ 厄米、幺正、对合"""
        tol = tol or Config.tolerances()
        S = np.asarray(S_tilde, dtype=complex)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise SymmetryValidationError("S̃ 必须是方阵")
        eye = np.eye(S.shape[0])
        if max_norm(S - S.conj().T) > tol.tol_sym:
            raise SymmetryValidationError("S̃ 非厄米")
        if max_norm(S @ S - eye) > tol.tol_sym:
            raise SymmetryValidationError("S̃ 非对合 (S̃² ≠ I)")
        if max_norm(S.conj().T @ S - eye) > tol.tol_sym:
            raise SymmetryValidationError("S̃ 非幺正")
        return S

    # ---------- 检查 ----------

    @staticmethod
    def check_symmetry(H_tau_of_k: np.ndarray, op: SymmetryOperator,
                       k_grid: Optional[np.ndarray] = None,
                       tol: Optional[Tolerances] = None) -> SymmetryReport:
        """残差 = max_k ‖O·conj?(H_τ(ε_O k))·O⁻¹ − η_O H_τ(k)‖"""
        tol = tol or Config.tolerances()
        SymmetryManager.validate_operator(op, tol)
        H_grid = np.asarray(H_tau_of_k, dtype=complex)
        if H_grid.ndim == 2:
            H_grid = H_grid[None, :, :]
        if H_grid.shape[1] != op.dim:
            raise ValidationError(f"对称操作维数 {op.dim} 与 H_τ 维数 {H_grid.shape[1]} 不符")
        minus = _minus_indices(H_grid.shape[0], k_grid)
        residuals = []
        for i in range(H_grid.shape[0]):
            source = H_grid[minus[i]] if op.eps_k < 0 else H_grid[i]
            residuals.append(max_norm(op.apply(source) - op.eta * H_grid[i]))
        residual = max(residuals)
        return SymmetryReport(
            name=op.name or op.kind.value, kind=op.kind, residual=residual,
            residuals_per_k=residuals, holds=residual <= tol.tol_sym, tolerance=tol.tol_sym,
        )

    @staticmethod
    def sublattice_residual(K_tilde: np.ndarray, S_tilde: np.ndarray) -> Tuple[float, float]:
        """单个约化矩阵：返回 (ε, ‖S̃hS̃ + h‖)"""
        n = K_tilde.shape[0]
        epsilon = float(np.trace(K_tilde).real / n)
        h = K_tilde - epsilon * np.eye(n)
        return epsilon, max_norm(S_tilde @ h @ S_tilde + h)

    @staticmethod
    def check_sublattice(sq: Sequence[SqueezeDecomposition], S_tilde: np.ndarray,
                         tol: Optional[Tolerances] = None) -> SublatticeReport:
        """ε = Tr K̃/Ñ 须与 k 无关；h = K̃ − εI 与 S̃ 反对易；K̃ 谱关于 ε 对称"""
        tol = tol or Config.tolerances()
        S = SymmetryManager.validate_sublattice_matrix(S_tilde, tol)
        if isinstance(sq, SqueezeDecomposition):
            sq = [sq]
        n = sq[0].n_modes
        if S.shape[0] != n:
            raise SymmetryValidationError(f"S̃ 维数 {S.shape[0]} 与 Ñ={n} 不符")

        epsilons = np.array([s.gap_center for s in sq])
        epsilon = float(np.mean(epsilons))
        spread = float(np.max(np.abs(epsilons - epsilon)))

        residuals, spectrum_residual = [], 0.0
        for s in sq:
            h = s.K_tilde - epsilon * np.eye(n)
            residuals.append(max_norm(S @ h @ S + h))
            energies = np.sort(la.eigvalsh(s.K_tilde))
            mirrored = np.sort(2.0 * epsilon - energies)
            spectrum_residual = max(spectrum_residual, float(np.max(np.abs(energies - mirrored))))
            spectrum_residual = max(spectrum_residual, float(max(0.0, -energies[0], -mirrored[0])))
        residual = max(residuals)

        diagnostic = ""
        holds = residual <= tol.tol_sym and spectrum_residual <= tol.tol_sym
        if spread > tol.tol_sym:
            holds = False
            diagnostic = f"ε 随 k 变化: 最大偏离 {spread:.3e}"
        elif not holds:
            diagnostic = f"S̃h+hS̃ 残差 {residual:.3e}, 谱对称残差 {spectrum_residual:.3e}"
        return SublatticeReport(
            epsilon=epsilon, S_tilde=S, residual=residual, holds=holds,
            epsilon_spread=spread, spectrum_residual=spectrum_residual,
            residuals_per_k=residuals, diagnostic=diagnostic,
        )

    @staticmethod
    def offdiagonalize_in_S_basis(h_of_k: np.ndarray, S_tilde: np.ndarray,
                                  tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, np.ndarray]:
        """旋转到 S̃ 本征基（+1 块在前），返回 (D(k) 堆叠, 基矩阵 P)"""
        tol = tol or Config.tolerances()
        S = SymmetryManager.validate_sublattice_matrix(S_tilde, tol)
        h_grid = np.asarray(h_of_k, dtype=complex)
        if h_grid.ndim == 2:
            h_grid = h_grid[None, :, :]
        eigvals, eigvecs = la.eigh(S)
        order = np.argsort(-np.round(eigvals, 8), kind='stable')
        eigvals, P = eigvals[order], eigvecs[:, order]
        # 规范：每个基向量模最大的分量取正实数
        for col in range(P.shape[1]):
            pivot = P[np.argmax(np.abs(P[:, col])), col]
            P[:, col] *= abs(pivot) / pivot
        n_a = int(np.sum(eigvals > 0))

        D = []
        for i, h in enumerate(h_grid):
            rotated = P.conj().T @ h @ P
            block = rotated[:n_a, n_a:]
            rebuilt = np.block([
                [np.zeros((n_a, n_a)), block],
                [block.conj().T, np.zeros((h.shape[0] - n_a, h.shape[0] - n_a))],
            ])
            if max_norm(rotated - rebuilt) > tol.tol_sym:
                raise SymmetryValidationError(
                    f"h(k) 在 S̃ 基中不是块非对角形式 (k 下标 {i}, 残差 {max_norm(rotated - rebuilt):.3e})"
                )
            D.append(block)
        return np.stack(D), P

    @staticmethod
    def construct_sls_bdg(h_of_k: np.ndarray, epsilon_bare: float, xi: complex, S: np.ndarray,
                          tol: Optional[Tolerances] = None) -> SlsConstruction:
        """K = ε̄I + h(k), M = ξS；解析解 W = [[0, ΞS], [Ξ*S, 0]]，K̃ = √(ε̄²−|ξ|²)I + h"""
        tol = tol or Config.tolerances()
        h_grid = np.asarray(h_of_k, dtype=complex)
        n_k, n = h_grid.shape[0], h_grid.shape[1]
        S = np.asarray(S, dtype=complex)
        xi = complex(xi)
        if epsilon_bare <= abs(xi):
            raise ValidationError(f"ε̄={epsilon_bare} ≤ |ξ|={abs(xi)}，构造失去热力学稳定性")
        if max_norm(S - S.T) > tol.tol_sym:
            raise PreconditionError("S 必须对称 (S = Sᵀ)")
        SymmetryManager.validate_sublattice_matrix(S, tol)
        minus = _minus_indices(n_k, None)
        for i in range(n_k):
            h = h_grid[i]
            if max_norm(h - h.conj().T) > tol.tol_herm:
                raise PreconditionError(f"h(k) 非厄米 (k 下标 {i})")
            if max_norm(h_grid[minus[i]].conj() - h) > tol.tol_sym:
                raise PreconditionError(f"h(k) 不满足 T̃=I 的时间反演 (k 下标 {i})")
            if max_norm(S @ h @ S + h) > tol.tol_sym:
                raise PreconditionError(f"h(k) 不与 S 反对易 (k 下标 {i})")

        eye = np.eye(n)
        bloch = BlochBdg(
            n_modes=n,
            k_grid=2.0 * np.pi * np.arange(n_k) / n_k,
            K_of_k=epsilon_bare * eye[None, :, :] + h_grid,
            M_of_k=np.repeat((xi * S)[None, :, :], n_k, axis=0),
            label="sls_family",
        )
        bloch.validate(tol.tol_herm)

        magnitude = 0.25 * np.log((epsilon_bare - abs(xi)) / (epsilon_bare + abs(xi)))
        Xi = magnitude * np.exp(1j * np.angle(xi)) if xi != 0 else 0.0
        zero = np.zeros((n, n))
        W_pred = np.block([[zero, Xi * S], [np.conj(Xi) * S, zero]])
        epsilon = float(np.sqrt(epsilon_bare ** 2 - abs(xi) ** 2))
        K_tilde_pred = epsilon * eye[None, :, :] + h_grid

        squeezes = DiagonalizeManager.squeeze_grid(bloch, tol)
        deviation = max(
            max(max_norm(s.K_tilde - K_tilde_pred[i]), max_norm(s.W - W_pred))
            for i, s in enumerate(squeezes)
        )
        if deviation > tol.tol_cross:
            raise CrossCheckError("K̃/W 解析解", deviation, tol.tol_cross)
        return SlsConstruction(
            bloch=bloch, W_predicted=W_pred, K_tilde_predicted=K_tilde_pred,
            epsilon=epsilon, max_deviation=deviation, squeeze_parameter=Xi,
            extra={'squeezes': squeezes},
        )

    @staticmethod
    def squeeze_preservation_test(bloch: BlochBdg, op: SymmetryOperator,
                                  tol: Optional[Tolerances] = None,
                                  squeezes: Optional[List[SqueezeDecomposition]] = None) -> PreservationReport:
        """O·conj?(W(ε_O k))·O⁻¹ = W(k)，且 H'_τ 满足同一对称关系"""
        tol = tol or Config.tolerances()
        SymmetryManager.validate_operator(op, tol)
        H_tau = BdgManager.dynamical_grid(BdgManager.assemble_grid(bloch, tol))
        sublattice = op.kind is SymmetryKind.SUBLATTICE
        if not sublattice:
            upstream = SymmetryManager.check_symmetry(H_tau, op, bloch.k_grid, tol)
            if not upstream.holds:
                raise PreconditionError(
                    f"{upstream.name} 在 H_τ 上不成立 (残差 {upstream.residual:.3e})"
                )
        squeezes = squeezes or DiagonalizeManager.squeeze_grid(bloch, tol)
        tau3 = PauliLikeMetrics.for_modes(bloch.n_modes).tau3
        epsilon = float(np.mean([s.gap_center for s in squeezes]))

        def reduced(s: SqueezeDecomposition) -> np.ndarray:
            # 子格情形比较 H'_τ − ετ3，其在 𝒮 下反号
            return DiagonalizeManager._reduced(s) - epsilon * tau3 if sublattice \
                else DiagonalizeManager._reduced(s)

        W_res, red_res, per_k = 0.0, 0.0, []
        for i in range(bloch.n_k):
            source = squeezes[bloch.minus_index(i)] if op.eps_k < 0 else squeezes[i]
            w = max_norm(op.apply(source.W) - squeezes[i].W)
            r = max_norm(op.apply(reduced(source)) - op.eta * reduced(squeezes[i]))
            W_res, red_res = max(W_res, w), max(red_res, r)
            per_k.append(max(w, r))
        return PreservationReport(
            name=op.name or op.kind.value, kind=op.kind, W_residual=W_res,
            reduced_residual=red_res, holds=max(W_res, red_res) <= tol.tol_sym,
            residuals_per_k=per_k,
        )

    @staticmethod
    def dynamics_inversion_residual(H: np.ndarray, S_tilde: np.ndarray, t: float,
                                    tol: Optional[Tolerances] = None) -> float:
        """‖U(−t) − exp(2itετ3e^{−2W}) 𝒮U(t)𝒮⁻¹‖，U(t) = exp(−iH_τ t)（实验性检查）"""
        tol = tol or Config.tolerances()
        logger.warning("动力学反演恒等式检查为实验性功能")
        sq = DiagonalizeManager.compute_W(H, tol)
        S = SymmetryManager.validate_sublattice_matrix(S_tilde, tol)
        n = sq.n_modes
        tau3 = PauliLikeMetrics.for_modes(n).tau3
        S_full = la.block_diag(S, S.conj())
        H_tau = BdgManager.dynamical_matrix(H)
        epsilon = sq.gap_center

        def evolution(time: float) -> np.ndarray:
            return la.expm(-1j * H_tau * time)

        phase = la.expm(2j * t * epsilon * tau3 @ expm_herm(sq.W, -2.0))
        rhs = phase @ S_full @ evolution(t) @ S_full.conj().T
        return max_norm(evolution(-t) - rhs)

    @staticmethod
    def check_operators_on_grid(bloch: BlochBdg, ops: Sequence[SymmetryOperator],
                                tol: Optional[Tolerances] = None) -> List[SymmetryReport]:
        """并行检查多个候选操作"""
        tol = tol or Config.tolerances()
        H_tau = BdgManager.dynamical_grid(BdgManager.assemble_grid(bloch, tol))
        return resource_manager.map_ordered(
            lambda op: SymmetryManager.check_symmetry(H_tau, op, bloch.k_grid, tol),
            list(ops), "symmetry_check",
        )
