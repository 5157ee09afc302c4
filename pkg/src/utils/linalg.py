"""
厄米矩阵函数

平方根、逆平方根、对数与指数都走厄米本征分解，取主分支。
"""
import numpy as np
import scipy.linalg as la


def hermitize(mat: np.ndarray) -> np.ndarray:
    """消去舍入误差带来的反厄米部分"""
    return 0.5 * (mat + mat.conj().T)


def max_norm(mat: np.ndarray) -> float:
    """逐元素最大模"""
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(mat)))


def herm_function(mat: np.ndarray, func) -> np.ndarray:
    """f(A) = Q f(w) Q†，A 厄米"""
    eigvals, eigvecs = la.eigh(hermitize(mat))
    return hermitize((eigvecs * func(eigvals)) @ eigvecs.conj().T)


def sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """正定矩阵的主平方根"""
    return herm_function(mat, np.sqrt)


def inv_sqrtm_pd(mat: np.ndarray) -> np.ndarray:
    """正定矩阵的逆平方根"""
    return herm_function(mat, lambda w: 1.0 / np.sqrt(w))


def logm_pd(mat: np.ndarray) -> np.ndarray:
    """正定矩阵的主对数"""
    return herm_function(mat, np.log)


def expm_herm(mat: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """exp(scale·A)，A 厄米"""
    return herm_function(mat, lambda w: np.exp(scale * w))


def coshm_herm(mat: np.ndarray) -> np.ndarray:
    return herm_function(mat, np.cosh)


def sinhm_herm(mat: np.ndarray) -> np.ndarray:
    return herm_function(mat, np.sinh)


def min_eigenvalue(mat: np.ndarray) -> float:
    """厄米矩阵最小本征值"""
    return float(la.eigvalsh(hermitize(mat))[0])


def spectral_norm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat, 2)) if mat.size else 0.0
