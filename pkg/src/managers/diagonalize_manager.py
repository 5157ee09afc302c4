"""赝幺正 Bogoliubov 对角化、Williamson 辛对角化、稳定性分类与 W 约化"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from config import Config, Tolerances
from src.managers.bdg_manager import BdgManager
from src.models.bdg import BlochBdg, PauliLikeMetrics, RegularizedMatrix
from src.models.spectra import (
    BogoliubovResult, DeformationReport, SqueezeDecomposition, StabilityKind,
)
from src.utils.error_handler import (
    CrossCheckError, NotPositiveDefiniteError, PreconditionError, ValidationError,
)
from src.utils.linalg import (
    coshm_herm, expm_herm, hermitize, inv_sqrtm_pd, logm_pd, max_norm,
    min_eigenvalue, sinhm_herm, spectral_norm, sqrtm_psd,
)
from src.utils.resource_manager import resource_manager

logger = logging.getLogger(__name__)

# τ3 Gram 矩阵本征值低于该相对阈值视为亏损（例外点）
DEFECT_THRESHOLD = 1e-8
# 简并判据（相对 ‖H‖）
DEGENERACY_THRESHOLD = 1e-8


def _order_modes(values: np.ndarray, vectors: np.ndarray, ascending: bool, scale: float) -> np.ndarray:
    """按能量排序，简并时按本征向量模的字典序打破平局"""
    if values.size == 0:
        return np.zeros(0, dtype=int)
    primary = np.round(values / scale, 10) if ascending else -np.round(values / scale, 10)
    moduli = np.round(np.abs(vectors), 10)
    # np.lexsort 以最后一个键为主键
    keys = [moduli[row] for row in range(min(3, moduli.shape[0]) - 1, -1, -1)] + [primary]
    return np.lexsort(keys)


class DiagonalizeManager:
    """Bogoliubov 对角化与压缩约化"""

    @staticmethod
    def bogoliubov_diagonalize(H: np.ndarray, tol: Optional[Tolerances] = None,
                               regularization: float = 0.0) -> BogoliubovResult:
        """求 V, Λ 使 H_τ V = V Λ 且 V†τ3V = τ3

        正定 H 走 Cholesky 路线：H = L L†，对 L†τ3L 做幺正对角化后重标度。
        其余情况退回到 H_τ 的一般本征求解并在 τ3 内积下正交化。
        """
        tol = tol or Config.tolerances()
        H = hermitize(BdgManager._check_square_even(H))
        norm = spectral_norm(H)
        if min_eigenvalue(H) > tol.tol_pd * norm:
            try:
                return DiagonalizeManager._colpa(H, norm, regularization)
            except np.linalg.LinAlgError:
                logger.debug("Cholesky 分解失败，退回一般本征求解")
        result = DiagonalizeManager._generic(H, norm, tol, regularization)
        if result.stability is StabilityKind.DYNAMICALLY_UNSTABLE:
            return result
        stability = DiagonalizeManager.classify_stability(H, result, tol)
        return BogoliubovResult(
            V=result.V, E_plus=result.E_plus, E_minus_neg=result.E_minus_neg,
            stability=stability, method=result.method, regularization=regularization,
        )

    @staticmethod
    def _colpa(H: np.ndarray, norm: float, regularization: float) -> BogoliubovResult:
        n = H.shape[0] // 2
        tau3 = PauliLikeMetrics.for_modes(n).tau3
        L = np.linalg.cholesky(H)
        A = hermitize(L.conj().T @ tau3 @ L)
        d, U = la.eigh(A)

        scale = max(norm, np.finfo(float).tiny)
        pos = np.flatnonzero(d > 0)
        neg = np.flatnonzero(d <= 0)
        pos = pos[_order_modes(d[pos], U[:, pos], True, scale)]
        # 空穴侧：|λ| 由小到大
        neg = neg[_order_modes(d[neg], U[:, neg], False, scale)]
        order = np.concatenate([pos, neg])
        d, U = d[order], U[:, order]

        V = la.solve_triangular(L.conj().T, U, lower=False) * np.sqrt(np.abs(d))
        return BogoliubovResult(
            V=V,
            E_plus=d[:n].copy(),
            E_minus_neg=d[n:].copy(),
            stability=StabilityKind.THERMO_AND_DYNAMICAL,
            method="cholesky",
            regularization=regularization,
        )

    @staticmethod
    def _generic(H: np.ndarray, norm: float, tol: Tolerances,
                 regularization: float) -> BogoliubovResult:
        n = H.shape[0] // 2
        tau3 = PauliLikeMetrics.for_modes(n).tau3
        w, X = la.eig(tau3 @ H)
        scale = max(norm, 1.0)

        def unstable(reason: str) -> BogoliubovResult:
            logger.info(f"动力学不稳定: {reason}")
            return BogoliubovResult(
                V=None, E_plus=np.zeros(0), E_minus_neg=np.zeros(0),
                stability=StabilityKind.DYNAMICALLY_UNSTABLE, method="eig",
                regularization=regularization, raw_eigenvalues=w,
            )

        if np.max(np.abs(w.imag)) > tol.tol_eig * scale:
            return unstable(f"复本征值, max|Im λ|={np.max(np.abs(w.imag)):.3e}")

        w = w.real
        X = X / np.linalg.norm(X, axis=0)
        order = np.argsort(w, kind='stable')
        w, X = w[order], X[:, order]

        pos_vals, pos_vecs, neg_vals, neg_vecs = [], [], [], []
        start = 0
        while start < w.size:
            stop = start + 1
            while stop < w.size and w[stop] - w[start] <= DEGENERACY_THRESHOLD * scale:
                stop += 1
            Xg = X[:, start:stop]
            gram = hermitize(Xg.conj().T @ tau3 @ Xg)
            gv, Q = la.eigh(gram)
            if np.min(np.abs(gv)) <= DEFECT_THRESHOLD * max(1.0, np.max(np.abs(gv))):
                return unstable(f"τ3 范数为零（亏损块），λ≈{w[start]:.6g}")
            Y = (Xg @ Q) / np.sqrt(np.abs(gv))
            energy = float(np.mean(w[start:stop]))
            for col, sign in zip(Y.T, np.sign(gv)):
                if sign > 0:
                    pos_vals.append(energy)
                    pos_vecs.append(col)
                else:
                    neg_vals.append(energy)
                    neg_vecs.append(col)
            start = stop

        if len(pos_vals) != n:
            return unstable(f"正范数模数目 {len(pos_vals)} ≠ {n}")

        pos_vals = np.array(pos_vals)
        neg_vals = np.array(neg_vals)
        P = np.array(pos_vecs).T
        N = np.array(neg_vecs).T
        p_order = _order_modes(pos_vals, P, True, scale)
        n_order = _order_modes(neg_vals, N, False, scale)
        V = np.hstack([P[:, p_order], N[:, n_order]])
        return BogoliubovResult(
            V=V, E_plus=pos_vals[p_order], E_minus_neg=neg_vals[n_order],
            stability=StabilityKind.DYNAMICAL_ONLY, method="eig",
            regularization=regularization,
        )

    @staticmethod
    def classify_stability(H: np.ndarray, bog: BogoliubovResult,
                           tol: Optional[Tolerances] = None) -> StabilityKind:
        """热力学 / 动力学稳定性分类（全函数）"""
        tol = tol or Config.tolerances()
        if bog.stability is StabilityKind.DYNAMICALLY_UNSTABLE or bog.V is None:
            return StabilityKind.DYNAMICALLY_UNSTABLE
        H = hermitize(np.asarray(H, dtype=complex))
        if min_eigenvalue(H) >= -tol.tol_pd * spectral_norm(H):
            return StabilityKind.THERMO_AND_DYNAMICAL
        if np.any(bog.E_plus < -tol.tol_eig):
            return StabilityKind.LANDAU_UNSTABLE
        return StabilityKind.DYNAMICAL_ONLY

    @staticmethod
    def compute_W(H: np.ndarray, tol: Optional[Tolerances] = None,
                  regularization: float = 0.0) -> SqueezeDecomposition:
        """e^{2W} = H^{−1/2}(H^{1/2}τ3Hτ3H^{1/2})^{1/2}H^{−1/2}，并与 V V† 交叉校验"""
        tol = tol or Config.tolerances()
        H = hermitize(BdgManager._check_square_even(H))
        n = H.shape[0] // 2
        tau3 = PauliLikeMetrics.for_modes(n).tau3
        eig_min = min_eigenvalue(H)
        if eig_min <= tol.tol_pd * spectral_norm(H):
            raise NotPositiveDefiniteError(eig_min)

        H_half = sqrtm_psd(H)
        H_minus_half = inv_sqrtm_pd(H)
        inner = hermitize(H_half @ tau3 @ H @ tau3 @ H_half)
        exp_2W = hermitize(H_minus_half @ sqrtm_psd(inner) @ H_minus_half)

        bog = DiagonalizeManager.bogoliubov_diagonalize(H, tol, regularization)
        exp_2W_b = hermitize(bog.V @ bog.V.conj().T)
        cross = max_norm(exp_2W - exp_2W_b) / max_norm(exp_2W)
        if cross > tol.tol_cross:
            raise CrossCheckError("e^{2W}", cross, tol.tol_cross)

        W = hermitize(0.5 * logm_pd(exp_2W))
        exp_W = sqrtm_psd(exp_2W)
        exp_minus_W = inv_sqrtm_pd(exp_2W)
        U = (exp_minus_W @ bog.V)[:n, :n]
        K_tilde = hermitize((U * bog.E_plus) @ U.conj().T)
        H_prime = exp_minus_W @ tau3 @ H @ exp_W
        return SqueezeDecomposition(
            W=W, exp_W=exp_W, U=U, K_tilde=K_tilde, E_plus=bog.E_plus,
            H_prime_tau=H_prime, cross_check=cross, regularization=regularization,
        )

    @staticmethod
    def squeeze_from_bogoliubov(bog: BogoliubovResult) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """仅由 V 得到 (e^W, e^{−W}, U)：e^{2W} = V V†"""
        if bog.V is None:
            raise PreconditionError("动力学不稳定的结果没有本征基")
        n = bog.n_modes
        exp_2W = hermitize(bog.V @ bog.V.conj().T)
        exp_W = sqrtm_psd(exp_2W)
        exp_minus_W = inv_sqrtm_pd(exp_2W)
        U = (exp_minus_W @ bog.V)[:n, :n]
        return exp_W, exp_minus_W, U

    @staticmethod
    def realify_quadrature(R: np.ndarray) -> np.ndarray:
        """复 Hermitian R = A + iB → 4Ñ×4Ñ 实对称形式，坐标次序 (x_re, x_im, p_re, p_im)"""
        n = R.shape[0] // 2
        big = np.block([[R.real, -R.imag], [R.imag, R.real]])
        order = np.r_[0:n, 2 * n:3 * n, n:2 * n, 3 * n:4 * n]
        return big[np.ix_(order, order)]

    @staticmethod
    def williamson_diagonalize(R: np.ndarray, tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        正定 R：返回 (J, R')，Jᵀ R J = R' 为对角，Jᵀ(iτ2)J = iτ2

        复 Hermitian R（k ≠ 0 的 Bloch 块）先实化为 4Ñ 维实对称形式再分解，
        此时 J、R' 属于实化坐标，对角元为 E_+(k) ∪ E_+(−k)。
        """
        tol = tol or Config.tolerances()
        R = np.asarray(R)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] % 2:
            raise ValidationError(f"需要 2Ñ×2Ñ 方阵，实际形状 {R.shape}")
        if np.iscomplexobj(R):
            if np.max(np.abs(R.imag)) > tol.tol_herm:
                if np.max(np.abs(R - R.conj().T)) > tol.tol_herm:
                    raise ValidationError("R 非 Hermitian")
                R = DiagonalizeManager.realify_quadrature(hermitize(R))
                logger.debug(f"复正交分量形式已实化为 {R.shape[0]} 维")
            else:
                R = R.real
        if np.max(np.abs(R - R.T)) > tol.tol_herm:
            raise ValidationError("R 非对称")
        R = 0.5 * (R + R.T)
        eig_min = float(np.linalg.eigvalsh(R)[0])
        if eig_min <= 0:
            raise NotPositiveDefiniteError(eig_min)

        n = R.shape[0] // 2
        omega = PauliLikeMetrics.for_modes(n).symplectic_form
        rotmat = np.zeros((2 * n, 2 * n))
        for i in range(n):
            rotmat[2 * i, i] = 1
            rotmat[2 * i + 1, i + n] = 1

        Mm12 = inv_sqrtm_pd(R).real
        r1 = Mm12 @ omega @ Mm12
        s1, K = la.schur(r1, output='real')
        # 置换每个 2×2 块，使 Schur 形式上对角元为正
        swap = np.array([[0, 1], [1, 0]])
        seq = [np.eye(2) if s1[2 * i, 2 * i + 1] > 0 else swap for i in range(n)]
        p = la.block_diag(*seq)
        Kt = K @ p
        s1t = p @ s1 @ p
        dd = rotmat.T @ s1t @ rotmat
        Ktt = Kt @ rotmat
        nu = np.array([1.0 / dd[i, i + n] for i in range(n)])
        Db = np.diag(np.concatenate([nu, nu]))
        J = Mm12 @ Ktt @ np.sqrt(Db)
        R_prime = J.T @ R @ J
        return J, R_prime

    @staticmethod
    def symplectic_eigenvalues(R: np.ndarray, tol: Optional[Tolerances] = None) -> np.ndarray:
        """R' 的对角前半，升序"""
        _, R_prime = DiagonalizeManager.williamson_diagonalize(R, tol)
        half = R_prime.shape[0] // 2
        return np.sort(np.diag(R_prime)[:half])

    @staticmethod
    def _reduced(sq: SqueezeDecomposition) -> np.ndarray:
        n = sq.n_modes
        return la.block_diag(sq.K_tilde, sq.H_prime_tau[n:, n:])

    @staticmethod
    def _particle_gap(eigenvalues: np.ndarray, n: int) -> float:
        """粒子支（最高的 Ñ 个本征值）关于其均值的能隙"""
        particle = np.sort(np.sort(eigenvalues.real)[-n:])
        center = float(np.mean(particle))
        above = particle[particle > center]
        below = particle[particle <= center]
        if above.size and below.size:
            return float(above[0] - below[-1])
        return float(2.0 * np.min(np.abs(particle - center)))

    @staticmethod
    def _check_lambdas(lambdas: Sequence[float]) -> List[float]:
        lambdas = [float(x) for x in lambdas]
        if any(x < 0.0 or x > 1.0 for x in lambdas):
            raise PreconditionError("λ 必须位于 [0, 1]")
        if not any(abs(x) < 1e-12 for x in lambdas) or not any(abs(x - 1.0) < 1e-12 for x in lambdas):
            raise PreconditionError("λ 采样必须包含 0 与 1")
        return lambdas

    @staticmethod
    def deformation_path(H: np.ndarray, sq: SqueezeDecomposition,
                         lambdas: Sequence[float]) -> DeformationReport:
        """H_τ(λ) = e^{(1−λ)W} H'_τ e^{−(1−λ)W}"""
        lambdas = DiagonalizeManager._check_lambdas(lambdas)
        n = sq.n_modes
        H_tau = BdgManager.dynamical_matrix(H)
        reduced = DiagonalizeManager._reduced(sq)
        spectra, gaps, endpoints = [], [], []
        for lam in lambdas:
            s = 1.0 - lam
            H_lam = expm_herm(sq.W, s) @ reduced @ expm_herm(sq.W, -s)
            spectrum = np.sort_complex(la.eigvals(H_lam))
            spectra.append(spectrum)
            gaps.append(DiagonalizeManager._particle_gap(spectrum, n))
            if abs(lam) < 1e-12:
                endpoints.append(max_norm(H_lam - H_tau))
            elif abs(lam - 1.0) < 1e-12:
                endpoints.append(max_norm(H_lam - reduced))
        reference = np.sort(spectra[0].real)
        deviation = max(float(np.max(np.abs(np.sort(sp.real) - reference))) for sp in spectra)
        return DeformationReport(
            lambdas=lambdas, spectra=spectra, gaps=gaps,
            max_spectral_deviation=deviation, endpoint_residuals=endpoints,
        )

    @staticmethod
    def chaudhary_deformation(sq: SqueezeDecomposition, lambdas: Sequence[float]) -> DeformationReport:
        """e^{±(1−λ)W} → cosh W ± (1−λ) sinh W；只要求能隙不闭合"""
        lambdas = DiagonalizeManager._check_lambdas(lambdas)
        n = sq.n_modes
        reduced = DiagonalizeManager._reduced(sq)
        cosh_W = coshm_herm(sq.W)
        sinh_W = sinhm_herm(sq.W)
        spectra, gaps = [], []
        for lam in lambdas:
            s = 1.0 - lam
            H_lam = (cosh_W + s * sinh_W) @ reduced @ (cosh_W - s * sinh_W)
            spectrum = np.sort_complex(la.eigvals(H_lam))
            spectra.append(spectrum)
            gaps.append(DiagonalizeManager._particle_gap(spectrum, n))
        reference = np.sort(spectra[0].real)
        deviation = max(float(np.max(np.abs(np.sort(sp.real) - reference))) for sp in spectra)
        if min(gaps) <= 0:
            logger.warning(f"Chaudhary 形变中能隙闭合: min gap={min(gaps):.3e}")
        return DeformationReport(
            lambdas=lambdas, spectra=spectra, gaps=gaps, max_spectral_deviation=deviation,
        )

    @staticmethod
    def regularize_semidefinite(H: np.ndarray, delta: float,
                                tol: Optional[Tolerances] = None) -> RegularizedMatrix:
        """H → H + ΔI（仅对半正定 H）"""
        tol = tol or Config.tolerances()
        if delta <= 0:
            raise ValidationError("Δ 必须为正")
        H = hermitize(BdgManager._check_square_even(H))
        eig_min = min_eigenvalue(H)
        if eig_min < -tol.tol_pd * max(spectral_norm(H), 1.0):
            raise NotPositiveDefiniteError(eig_min)
        logger.info(f"半正定正则化: Δ={delta:.3e}, 原最小本征值 {eig_min:.3e}")
        shifted = H + delta * np.eye(H.shape[0])
        return RegularizedMatrix(matrix=shifted, delta=delta, min_eigenvalue=eig_min + delta)

    @staticmethod
    def regularize_bloch(bloch: BlochBdg, delta: float,
                         tol: Optional[Tolerances] = None) -> BlochBdg:
        """对网格上每个 H(k) 施加同一 Δ 正则化"""
        tol = tol or Config.tolerances()
        for i in range(bloch.n_k):
            DiagonalizeManager.regularize_semidefinite(BdgManager.assemble_at(bloch, i, tol), delta, tol)
        return bloch.regularized(delta)

    @staticmethod
    def diagonalize_grid(bloch: BlochBdg, tol: Optional[Tolerances] = None) -> List[BogoliubovResult]:
        """逐 k 对角化，并令空穴列满足 V(k) = τ1 V*(−k) τ1"""
        tol = tol or Config.tolerances()
        H_grid = BdgManager.assemble_grid(bloch, tol)
        raw = resource_manager.map_ordered(
            lambda H: DiagonalizeManager.bogoliubov_diagonalize(H, tol, bloch.regularization),
            list(H_grid), "bogoliubov_grid",
        )
        tau1 = PauliLikeMetrics.for_modes(bloch.n_modes).tau1
        n = bloch.n_modes
        paired = []
        for i, bog in enumerate(raw):
            partner = raw[bloch.minus_index(i)]
            if bog.V is None or partner.V is None:
                paired.append(bog)
                continue
            holes = tau1 @ partner.V[:, :n].conj()
            paired.append(BogoliubovResult(
                V=np.hstack([bog.V[:, :n], holes]),
                E_plus=bog.E_plus,
                E_minus_neg=-partner.E_plus,
                stability=bog.stability,
                method=bog.method,
                regularization=bog.regularization,
            ))
        return paired

    @staticmethod
    def squeeze_grid(bloch: BlochBdg, tol: Optional[Tolerances] = None) -> List[SqueezeDecomposition]:
        """逐 k 计算 W 分解"""
        tol = tol or Config.tolerances()
        H_grid = BdgManager.assemble_grid(bloch, tol)
        return resource_manager.map_ordered(
            lambda H: DiagonalizeManager.compute_W(H, tol, bloch.regularization),
            list(H_grid), "squeeze_grid",
        )
