"""拓扑不变量：卷绕数、辛极化及其量子化、零能平化与 AZ 分类表"""
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config, Tolerances
from src.managers.bdg_manager import BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.managers.symmetry_manager import SymmetryManager
from src.models.bdg import BlochBdg, PauliLikeMetrics
from src.models.spectra import BogoliubovResult
from src.models.topology import AZClass, TopologicalGroup, TopologyResult, WindingTrace
from src.utils.error_handler import (
    BandCrossingError, CrossCheckError, GapClosedError, PreconditionError,
    ResolutionError, ValidationError,
)
from src.utils.linalg import max_norm, spectral_norm

logger = logging.getLogger(__name__)

Z, TWO_Z, Z2, ZERO = TopologicalGroup.Z, TopologicalGroup.TWO_Z, TopologicalGroup.Z2, TopologicalGroup.ZERO

# d = 0..7
AZ_TABLE = {
    AZClass.A: (Z, ZERO, Z, ZERO, Z, ZERO, Z, ZERO),
    AZClass.AIII: (ZERO, Z, ZERO, Z, ZERO, Z, ZERO, Z),
    AZClass.AI: (Z, ZERO, ZERO, ZERO, TWO_Z, ZERO, Z2, Z2),
    AZClass.AII: (TWO_Z, ZERO, Z2, Z2, Z, ZERO, ZERO, ZERO),
}


def _wrap_unit(value: float, tol: float) -> float:
    """映射到 [0, 1)，贴近 1 的值归零"""
    value = value % 1.0
    return 0.0 if value > 1.0 - tol else value


def _distance_mod1(a: float, b: float) -> float:
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


class TopologyManager:
    """拓扑不变量计算"""

    @staticmethod
    def az_table_lookup(az_class: Union[AZClass, str], d: int) -> TopologicalGroup:
        """AZ 类与维数查表"""
        try:
            az_class = AZClass(az_class) if not isinstance(az_class, AZClass) else az_class
        except ValueError as e:
            raise ValidationError(f"未知 AZ 类: {az_class}") from e
        if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or not 0 <= d <= 7:
            raise ValidationError(f"维数 d 必须是 0..7 的整数，实际 {d!r}")
        return AZ_TABLE[az_class][int(d)]

    # ---------- 卷绕数 ----------

    @staticmethod
    def winding_trace(q_of_k: np.ndarray, k_grid: Optional[np.ndarray] = None,
                      tol: Optional[Tolerances] = None, scale: float = 1.0) -> WindingTrace:
        """链接相位累积：ν = Σ arg(q_{i+1}/q_i) / 2π（闭合回路）

        q_of_k 可以是标量序列 q(k_i)，也可以是 D(k_i) 矩阵堆叠（取行列式）。
        """
        tol = tol or Config.tolerances()
        q = np.asarray(q_of_k, dtype=complex)
        if q.ndim == 3:
            q = np.linalg.det(q)
        if q.ndim != 1 or q.size < 2:
            raise ValidationError("q(k) 至少需要两个网格点")
        if k_grid is None:
            k_grid = 2.0 * np.pi * np.arange(q.size) / q.size

        moduli = np.abs(q)
        closest = int(np.argmin(moduli))
        if moduli[closest] <= tol.tol_gap * scale:
            raise GapClosedError(f"|q(k)| = {moduli[closest]:.3e}", k=float(k_grid[closest]))

        links = np.angle(np.roll(q, -1) / q)
        max_link = float(np.max(np.abs(links)))
        if max_link > np.pi / 2:
            raise ResolutionError(
                f"相邻 k 点相位跳变 {max_link:.3f} > π/2，卷绕数不可靠，请加密 k 网格"
            )
        accumulated = float(np.sum(links) / (2.0 * np.pi))
        value = int(round(accumulated))
        residual = abs(accumulated - value)
        if residual > tol.tol_wind:
            raise ResolutionError(f"相位累积 {accumulated:.8f} 偏离整数，请加密 k 网格")
        return WindingTrace(
            value=value, residual=residual, max_link_phase=max_link,
            closest_approach=float(moduli[closest]), closest_index=closest,
        )

    @staticmethod
    def winding_number(q_of_k: np.ndarray, k_grid: Optional[np.ndarray] = None,
                       tol: Optional[Tolerances] = None, scale: float = 1.0) -> int:
        return TopologyManager.winding_trace(q_of_k, k_grid, tol, scale).value

    @staticmethod
    def q_trace_from_reduced(h_of_k: np.ndarray, S_tilde: np.ndarray,
                             tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, float]:
        """q(k) = conj(det D(k))；原型链给出 q = t1 + t2 e^{ik}。返回 (q, 最小奇异值)"""
        D, _ = SymmetryManager.offdiagonalize_in_S_basis(h_of_k, S_tilde, tol)
        if D.shape[1] != D.shape[2]:
            raise PreconditionError(
                f"S̃ 的 ±1 本征空间维数不等 ({D.shape[1]} vs {D.shape[2]})，det D(k) 无定义"
            )
        q = np.conj(np.linalg.det(D))
        gap = float(min(np.linalg.svd(block, compute_uv=False)[-1] for block in D))
        return q, gap

    # ---------- 辛极化 ----------

    @staticmethod
    def _lower_columns(bog: BogoliubovResult, tol: Tolerances, k: float) -> np.ndarray:
        E = bog.E_plus
        center = float(np.mean(E))
        lower = np.flatnonzero(E < center)
        upper = np.flatnonzero(E >= center)
        if lower.size and upper.size and np.min(E[upper]) - np.max(E[lower]) <= tol.tol_gap:
            raise GapClosedError("下支与上支能带简并", k=k)
        return lower

    @staticmethod
    def _check_grid(bogs: Sequence[BogoliubovResult]) -> None:
        if not bogs:
            raise ValidationError("Bogoliubov 网格为空")
        for bog in bogs:
            if bog.V is None:
                raise PreconditionError("网格中存在动力学不稳定的 k 点")

    @staticmethod
    def _band_columns(bogs: Sequence[BogoliubovResult], tol: Tolerances,
                      k_grid: np.ndarray) -> List[np.ndarray]:
        columns = [TopologyManager._lower_columns(b, tol, float(k)) for b, k in zip(bogs, k_grid)]
        counts = {c.size for c in columns}
        if len(counts) != 1:
            raise BandCrossingError(f"下支能带数目随 k 变化: {sorted(counts)}")
        if 0 in counts:
            raise BandCrossingError("不存在低于平均能量的能带")
        return columns

    @staticmethod
    def _wilson_phase(frames: Sequence[np.ndarray], tau3: np.ndarray, tol: Tolerances) -> float:
        """arg Π_i det(F_i† τ3 F_{i+1})，回路闭合"""
        product = 1.0 + 0.0j
        n_k = len(frames)
        for i in range(n_k):
            link = np.linalg.det(frames[i].conj().T @ tau3 @ frames[(i + 1) % n_k])
            if abs(link) < tol.tol_gap:
                raise ResolutionError(f"Wilson 环链接重叠 |⟨v|τ3|v'⟩| = {abs(link):.3e} 过小，请加密 k 网格")
            product *= link / abs(link)
        return float(np.angle(product))

    @staticmethod
    def symplectic_polarization(bogs: Sequence[BogoliubovResult],
                                k_grid: Optional[np.ndarray] = None,
                                tol: Optional[Tolerances] = None) -> float:
        """P = −(1/2π) Im log Π_i det⟨v_−(k_i)|τ3|v_−(k_{i+1})⟩ mod 1"""
        tol = tol or Config.tolerances()
        TopologyManager._check_grid(bogs)
        if k_grid is None:
            k_grid = 2.0 * np.pi * np.arange(len(bogs)) / len(bogs)
        tau3 = PauliLikeMetrics.for_modes(bogs[0].n_modes).tau3
        columns = TopologyManager._band_columns(bogs, tol, k_grid)
        frames = [b.V[:, c] for b, c in zip(bogs, columns)]
        phase = TopologyManager._wilson_phase(frames, tau3, tol)
        return _wrap_unit(-phase / (2.0 * np.pi), tol.tol_wind)

    @staticmethod
    def _reduced_frames(bogs: Sequence[BogoliubovResult], columns: Sequence[np.ndarray]) -> List[np.ndarray]:
        """下支在压缩表象中的正交归一列 u(k) = [e^{−W} v_−]_上半"""
        frames = []
        for bog, cols in zip(bogs, columns):
            _, exp_minus_W, _ = DiagonalizeManager.squeeze_from_bogoliubov(bog)
            frames.append((exp_minus_W @ bog.V[:, cols])[:bog.n_modes])
        return frames

    @staticmethod
    def _continuous_gauge(frames: Sequence[np.ndarray], tol: Tolerances) -> Tuple[List[np.ndarray], float]:
        """平行输运，再把回路相位 θ 均摊到每条链接；返回 (光滑周期规范下的框架, θ)"""
        n_k = len(frames)
        fixed = [frames[0]]
        for i in range(1, n_k):
            A, s, Bh = np.linalg.svd(fixed[-1].conj().T @ frames[i])
            if s[-1] < tol.tol_gap:
                raise ResolutionError(f"相邻 k 点下支重叠奇异值 {s[-1]:.3e} 过小，请加密 k 网格")
            fixed.append(frames[i] @ (Bh.conj().T @ A.conj().T))
        theta = float(np.angle(np.linalg.det(fixed[-1].conj().T @ fixed[0])))
        n_low = frames[0].shape[1]
        phases = np.exp(1j * theta * np.arange(n_k) / (n_k * n_low))
        return [f * p for f, p in zip(fixed, phases)], theta

    @staticmethod
    def whole_polarization_quantization(bogs: Sequence[BogoliubovResult], S_tilde: np.ndarray,
                                        k_grid: Optional[np.ndarray] = None,
                                        tol: Optional[Tolerances] = None) -> Tuple[float, int]:
        """下支与其 𝒮 伙伴带合起来的极化 P^whole = m，m 为 −arg det U(k) 的卷绕数，且 P = m/2 mod 1

        U(k) = [u_−(k), S̃u_−(k)] 在光滑周期规范下构造。
        """
        tol = tol or Config.tolerances()
        TopologyManager._check_grid(bogs)
        S = SymmetryManager.validate_sublattice_matrix(S_tilde, tol)
        n = bogs[0].n_modes
        if S.shape[0] != n:
            raise ValidationError(f"S̃ 维数 {S.shape[0]} 与 Ñ={n} 不符")
        if k_grid is None:
            k_grid = 2.0 * np.pi * np.arange(len(bogs)) / len(bogs)
        columns = TopologyManager._band_columns(bogs, tol, k_grid)
        if 2 * columns[0].size != n:
            raise PreconditionError(f"下支 {columns[0].size} 条能带不是 Ñ/2 = {n / 2}，无 𝒮 伙伴配对")

        frames, theta = TopologyManager._continuous_gauge(
            TopologyManager._reduced_frames(bogs, columns), tol)
        unitaries = [np.hstack([u, S @ u]) for u in frames]
        eye = np.eye(n)
        for U, k in zip(unitaries, k_grid):
            if max_norm(U.conj().T @ U - eye) > tol.tol_sym:
                raise PreconditionError(f"k = {float(k):.6f} 处 S̃u_− 与 u_− 不正交，𝒮 伙伴带不成立")

        n_k = len(frames)
        berry = 0.0
        for i in range(n_k):
            u, v = frames[i], frames[(i + 1) % n_k]
            berry += np.angle(np.linalg.det(u.conj().T @ v))
            berry += np.angle(np.linalg.det((S @ u).conj().T @ (S @ v)))
        P_whole = -float(berry) / (2.0 * np.pi)

        determinants = np.array([np.linalg.det(U) for U in unitaries])
        accumulated = -float(np.sum(np.angle(np.roll(determinants, -1) / determinants))) / (2.0 * np.pi)
        m = int(round(accumulated))
        if abs(P_whole - m) > tol.tol_wind:
            raise CrossCheckError("P^whole 整数化", abs(P_whole - m), tol.tol_wind)

        tau3 = PauliLikeMetrics.for_modes(n).tau3
        full = [b.V[:, c] for b, c in zip(bogs, columns)]
        P = _wrap_unit(-TopologyManager._wilson_phase(full, tau3, tol) / (2.0 * np.pi), tol.tol_wind)
        mismatch = _distance_mod1(P, m / 2.0)
        if mismatch > tol.tol_wind:
            raise CrossCheckError("P = P^whole/2 mod 1", mismatch, tol.tol_wind)
        logger.debug(f"P^whole = {P_whole:.8f}, m = {m}, 回路相位 θ/π = {theta / np.pi:.8f}")
        return P_whole, m

    # ---------- 零能平化 ----------

    @staticmethod
    def flatten_at_zero_energy(bogs: Sequence[BogoliubovResult], minus_index=None,
                               tol: Optional[Tolerances] = None) -> float:
        """V'(k) = diag(U(k), U*(−k))，H_flat = V' τ3 V'†；返回 max_k ‖H_flat − τ3‖"""
        tol = tol or Config.tolerances()
        TopologyManager._check_grid(bogs)
        n_k = len(bogs)
        minus_index = minus_index or (lambda i: (-i) % n_k)
        n = bogs[0].n_modes
        tau3 = PauliLikeMetrics.for_modes(n).tau3
        for i, bog in enumerate(bogs):
            if np.min(bog.E_plus) <= tol.tol_gap:
                raise GapClosedError(
                    f"零能隙闭合 (min E_plus = {np.min(bog.E_plus):.3e})，请先正则化",
                    k=2.0 * np.pi * i / n_k,
                )
        unitaries = [DiagonalizeManager.squeeze_from_bogoliubov(b)[2] for b in bogs]
        deviation = 0.0
        for i in range(n_k):
            U, U_minus = unitaries[i], unitaries[minus_index(i)]
            zero = np.zeros((n, n))
            V_flat = np.block([[U, zero], [zero, U_minus.conj()]])
            deviation = max(deviation, max_norm(V_flat @ tau3 @ V_flat.conj().T - tau3))
        return deviation

    # ---------- 流水线 ----------

    @staticmethod
    def default_sublattice(n_modes: int) -> np.ndarray:
        """diag(I, −I)：前一半模式记作 A 子格"""
        if n_modes % 2:
            raise PreconditionError(f"Ñ={n_modes} 为奇数，请在配置中给出 S̃")
        half = n_modes // 2
        return np.diag(np.r_[np.ones(half), -np.ones(half)]).astype(complex)

    @staticmethod
    def analyze(bloch: BlochBdg, S_tilde: Optional[np.ndarray] = None,
                tol: Optional[Tolerances] = None) -> TopologyResult:
        """约化 → 子格检查 → ν, P, P^whole，并校验 P ≡ ν/2 (mod 1)"""
        tol = tol or Config.tolerances()
        notes = []
        if S_tilde is None:
            S_tilde = TopologyManager.default_sublattice(bloch.n_modes)
            notes.append("S̃ 未给出，使用 diag(I, −I)")
        S_tilde = np.asarray(S_tilde, dtype=complex)

        squeezes = DiagonalizeManager.squeeze_grid(bloch, tol)
        report = SymmetryManager.check_sublattice(squeezes, S_tilde, tol)
        if not report.holds:
            raise PreconditionError(f"隐藏子格对称不成立: {report.diagnostic}")

        epsilon = report.epsilon
        eye = np.eye(bloch.n_modes)
        h_grid = np.stack([s.K_tilde - epsilon * eye for s in squeezes])
        q, gap = TopologyManager.q_trace_from_reduced(h_grid, S_tilde, tol)
        scale = max(spectral_norm(H) for H in BdgManager.assemble_grid(bloch, tol))
        trace = TopologyManager.winding_trace(q, bloch.k_grid, tol, scale)

        bogs = DiagonalizeManager.diagonalize_grid(bloch, tol)
        P = TopologyManager.symplectic_polarization(bogs, bloch.k_grid, tol)
        P_whole, m = TopologyManager.whole_polarization_quantization(bogs, S_tilde, bloch.k_grid, tol)

        mismatch = _distance_mod1(P, trace.value / 2.0)
        if mismatch > tol.tol_wind:
            raise CrossCheckError("P ≡ ν/2 (mod 1)", mismatch, tol.tol_wind)
        if abs(trace.value) >= 2:
            notes.append("|ν| ≥ 2：P 只保留 ν 的奇偶性，以 ν 为准")

        logger.info(f"拓扑分析完成: {bloch.label}, ν={trace.value}, P={P:.6f}, m={m}")
        return TopologyResult(
            winding=trace.value, polarization=P, polarization_whole=P_whole, whole_integer=m,
            q_trace=q, k_grid=np.array(bloch.k_grid), gap_center=epsilon, gap_min=2.0 * gap,
            winding_residual=trace.residual, regularization=bloch.regularization, notes=notes,
        )
