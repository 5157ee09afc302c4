"""关联函数 −Im C_j[ω]：解析 / 数值求和、共振包络与中隙峰"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from config import Config, Tolerances
from src.managers.bdg_manager import BdgManager
from src.managers.diagonalize_manager import DiagonalizeManager
from src.models.bdg import Boundary, PrototypeModel, RealSpaceBdg
from src.models.spectroscopy import (
    BandSide, CorrelationTrace, Direction, EnvelopeReport, TraceVerdict,
)
from src.utils.error_handler import PreconditionError, ResolutionError, ValidationError

logger = logging.getLogger(__name__)

# 中隙峰默认搜索半宽与相对阈值
MIDGAP_HALF_WIDTH = 0.25
MIDGAP_THRESHOLD = 0.05
# 能级合并为简并簇的相对容差
DEGENERACY_RTOL = 1e-9


def lorentzian_sum(omega_grid: np.ndarray, energies: np.ndarray, weights: np.ndarray,
                   kappa: float) -> np.ndarray:
    """Σ_n w_n κ / ((ω − E_n)² + κ²)"""
    detuning = omega_grid[:, None] - energies[None, :]
    return (weights[None, :] * kappa / (detuning ** 2 + kappa ** 2)).sum(axis=1)


def _refine(omega: np.ndarray, values: np.ndarray, i: int) -> Tuple[float, float]:
    """三点抛物线插值"""
    if i == 0 or i == values.size - 1:
        return float(omega[i]), float(values[i])
    left, mid, right = values[i - 1], values[i], values[i + 1]
    curvature = left - 2.0 * mid + right
    if curvature >= 0:
        return float(omega[i]), float(mid)
    shift = 0.5 * (left - right) / curvature
    step = omega[i + 1] - omega[i]
    return float(omega[i] + shift * step), float(mid - 0.25 * (left - right) * shift)


class SpectroscopyManager:
    """关联函数与包络分析"""

    @staticmethod
    def _check_kappa(kappa: float) -> None:
        if not kappa > 0:
            raise ValidationError(f"κ 必须 > 0，实际 {kappa}")

    @staticmethod
    def default_omega_grid(energies: Sequence[float], kappa: float,
                           points: int = Config.DEFAULT_OMEGA_POINTS,
                           margin: float = Config.DEFAULT_OMEGA_MARGIN) -> np.ndarray:
        """[min E − margin·κ, max E + margin·κ] 上的均匀网格"""
        SpectroscopyManager._check_kappa(kappa)
        energies = np.asarray(energies, dtype=float)
        return np.linspace(energies.min() - margin * kappa, energies.max() + margin * kappa, points)

    @staticmethod
    def correlation_pbc_analytic(model: PrototypeModel, L: int, omega_grid: Optional[np.ndarray],
                                 kappa: float) -> CorrelationTrace:
        """(1/2L) Σ_k Σ_± (cosh 2r ± cos φ(k)) κ / ((ω − E_±(k))² + κ²)"""
        SpectroscopyManager._check_kappa(kappa)
        if L < 1:
            raise ValidationError("L 必须 ≥ 1")
        if model.xi_abs >= model.mu:
            raise PreconditionError("需要 √(μ²−|ξ|²) 为实数（热力学稳定）")
        if model.xi_phase != 0.0:
            logger.warning("解析权重 cosh 2r ± cos φ 只对实 ξ 成立，复 ξ 请用 correlation_numeric")
        k = 2.0 * np.pi * np.arange(L) / L
        q = model.t1 + model.t2 * np.exp(1j * k)
        phi = np.angle(q)
        energies = np.concatenate([model.mu_tilde + np.abs(q), model.mu_tilde - np.abs(q)])
        weights = np.concatenate([model.cosh_2r + np.cos(phi), model.cosh_2r - np.cos(phi)]) / (2.0 * L)
        if omega_grid is None:
            omega_grid = SpectroscopyManager.default_omega_grid(energies, kappa)
        omega_grid = np.asarray(omega_grid, dtype=float)
        return CorrelationTrace(
            omega_grid=omega_grid,
            minus_im_C=lorentzian_sum(omega_grid, energies, weights, kappa),
            kappa=kappa, j=0, boundary=Boundary.PERIODIC,
            mode_energies=energies, mode_weights=weights, gap_center=model.mu_tilde,
        )

    @staticmethod
    def cell_weights(bdg: RealSpaceBdg, j: int, tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, np.ndarray]:
        """w_n = |Σ_{s∈cell j}(x_{n,s} + y_{n,s})|² / 2，返回 (E_n, w_n)"""
        tol = tol or Config.tolerances()
        n_cells = bdg.n_sites // bdg.sites_per_cell
        if not 0 <= j < n_cells:
            raise ValidationError(f"原胞下标 j={j} 超出范围 [0, {n_cells})")
        H = BdgManager.assemble_real_space(bdg, tol)
        bog = DiagonalizeManager.bogoliubov_diagonalize(H, tol)
        if bog.V is None:
            raise PreconditionError("实现动力学不稳定，关联函数无谱表示")
        n = bdg.n_sites
        cell = slice(j * bdg.sites_per_cell, (j + 1) * bdg.sites_per_cell)
        particle = bog.V[:n, :n][cell].sum(axis=0)
        hole = bog.V[n:, :n][cell].sum(axis=0)
        return bog.E_plus, 0.5 * np.abs(particle + hole) ** 2

    @staticmethod
    def correlation_numeric(realization: RealSpaceBdg, j: int, omega_grid: Optional[np.ndarray],
                            kappa: float, boundary: Optional[Boundary] = None,
                            gap_center: Optional[float] = None,
                            tol: Optional[Tolerances] = None) -> CorrelationTrace:
        """实空间谱表示，只保留共振项；j 从 0 计"""
        SpectroscopyManager._check_kappa(kappa)
        energies, weights = SpectroscopyManager.cell_weights(realization, j, tol)
        if omega_grid is None:
            omega_grid = SpectroscopyManager.default_omega_grid(energies, kappa)
        omega_grid = np.asarray(omega_grid, dtype=float)
        return CorrelationTrace(
            omega_grid=omega_grid,
            minus_im_C=lorentzian_sum(omega_grid, energies, weights, kappa),
            kappa=kappa, j=j,
            boundary=boundary or realization.boundary or Boundary.OPEN,
            mode_energies=energies, mode_weights=weights,
            gap_center=float(np.mean(energies)) if gap_center is None else gap_center,
        )

    @staticmethod
    def _peaks(trace: CorrelationTrace, window: Tuple[float, float]):
        omega, values = trace.omega_grid, trace.minus_im_C
        indices, _ = find_peaks(values)
        inside = [i for i in indices if window[0] <= omega[i] <= window[1]]
        return [_refine(omega, values, i) for i in inside]

    @staticmethod
    def _levels(trace: CorrelationTrace, window: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """窗口内的共振能级：简并模式合并为一簇，返回 (能级, 簇内权重和, 简并度)"""
        energies, weights = trace.mode_energies, trace.mode_weights
        inside = (energies >= window[0]) & (energies <= window[1])
        order = np.argsort(energies[inside])
        energies, weights = energies[inside][order], weights[inside][order]
        if not energies.size:
            return energies, weights, np.zeros(0, dtype=int)
        scale = max(1.0, float(np.abs(energies).max()))
        starts = np.flatnonzero(np.r_[True, np.diff(energies) > DEGENERACY_RTOL * scale])
        counts = np.diff(np.r_[starts, energies.size])
        return energies[starts], np.add.reduceat(weights, starts), counts

    @staticmethod
    def extract_envelope(trace: CorrelationTrace, band_window: Tuple[float, float],
                         band: BandSide = BandSide.LOWER,
                         tol: Optional[Tolerances] = None) -> EnvelopeReport:
        """窗口内每个共振能级一个峰（按频率），峰高取每个模式的 Lorentzian 峰值 w/κ

        相邻能级间距须 > 2κ，否则峰不可分辨。
        """
        tol = tol or Config.tolerances()
        lo, hi = band_window
        if not lo < hi:
            raise ValidationError("频率窗口必须满足 lo < hi")
        levels, weights, degeneracies = SpectroscopyManager._levels(trace, (lo, hi))
        if levels.size >= 2:
            spacing = float(np.min(np.diff(levels)))
            if not trace.kappa < 0.5 * spacing:
                raise ResolutionError(
                    f"κ={trace.kappa:.3e} ≥ 0.5×最小共振间距 {spacing:.3e}"
                )
        heights = weights / (degeneracies * trace.kappa) if levels.size else weights

        diffs = np.diff(heights)
        significant = diffs[np.abs(diffs) > tol.tol_env * max(heights, default=0.0)]
        signs = set(np.sign(significant).astype(int))
        monotonic = len(signs) <= 1
        if not signs or not monotonic:
            direction = Direction.NONE
        else:
            direction = Direction.INCREASING if signs == {1} else Direction.DECREASING
        return EnvelopeReport(
            peak_freqs=[float(x) for x in levels], peak_heights=[float(x) for x in heights],
            band=band, monotonic=monotonic, direction=direction,
            degeneracies=[int(d) for d in degeneracies],
        )

    @staticmethod
    def lower_band_window(trace: CorrelationTrace) -> Tuple[Tuple[float, float], float]:
        """下支中可分辨部分的窗口与能隙

        下支底部 (k≈0) 能带平坦，相邻能级间距可能 ≤ 2κ；从最高的不可分辨间距之上开始取窗，
        窗口上限为两带中点。
        """
        center = trace.gap_center if trace.gap_center is not None else float(np.mean(trace.mode_energies))
        energies = trace.mode_energies
        lower, upper = energies[energies < center], energies[energies > center]
        if not lower.size or not upper.size:
            return (float(energies.min()), center), 0.0
        gap = float(upper.min() - lower.max())
        midpoint = float(0.5 * (upper.min() + lower.max()))
        levels, _, _ = SpectroscopyManager._levels(trace, (float(lower.min()), float(lower.max())))
        unresolved = np.flatnonzero(np.diff(levels) <= 2.0 * trace.kappa)
        if unresolved.size:
            first = int(unresolved[-1]) + 1
            logger.debug(f"下支底部 {first} 个能级间距 ≤ 2κ，不计入包络")
            lo = float(0.5 * (levels[first - 1] + levels[first]))
        else:
            lo = float(energies.min() - 10.0 * trace.kappa)
        return (lo, midpoint), gap

    @staticmethod
    def classify_topology_from_trace(trace: CorrelationTrace,
                                     tol: Optional[Tolerances] = None) -> TraceVerdict:
        """下支包络单调且高度比 > threshold_ratio 判为拓扑，不单调判为平庸，其余不确定"""
        tol = tol or Config.tolerances()
        window, gap = SpectroscopyManager.lower_band_window(trace)
        if gap <= max(tol.tol_gap, trace.kappa):
            logger.info(f"能隙 {gap:.3e} 不足以分辨两支，判为 Undetermined")
            return TraceVerdict.UNDETERMINED
        try:
            report = SpectroscopyManager.extract_envelope(trace, window, BandSide.LOWER, tol)
        except ResolutionError as e:
            logger.info(f"包络分辨失败: {e.message}")
            return TraceVerdict.UNDETERMINED
        if len(report.peak_heights) < 3:
            return TraceVerdict.UNDETERMINED
        if not report.monotonic:
            return TraceVerdict.TRIVIAL
        if report.height_ratio > tol.threshold_ratio:
            return TraceVerdict.TOPOLOGICAL
        return TraceVerdict.UNDETERMINED

    @staticmethod
    def detect_midgap_peak(trace: CorrelationTrace, center: float,
                           half_width: float = MIDGAP_HALF_WIDTH,
                           threshold: float = MIDGAP_THRESHOLD) -> Optional[float]:
        """(center ± half_width) 内高于 threshold×全局最大值的峰，返回其频率"""
        peaks = SpectroscopyManager._peaks(trace, (center - half_width, center + half_width))
        floor = threshold * trace.peak_height
        candidates = [(h, f) for f, h in peaks
                      if abs(f - center) < half_width and h > floor]
        if not candidates:
            return None
        return max(candidates)[1]
