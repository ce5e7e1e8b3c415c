# splitbench/services/matfun_service.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

logger = logging.getLogger(__name__)

Operator = Union[np.ndarray, sp.spmatrix, Callable[[np.ndarray], np.ndarray]]

MATFUN_METHODS = ("krylov", "dense")


class KrylovConvergenceError(RuntimeError):
    def __init__(self, estimate: float, m: int):
        super().__init__(f"Krylov не сошёлся: оценка невязки {estimate:.3e} при m={m}")
        self.estimate = estimate
        self.m = m


@dataclass(frozen=True)
class MatfunConfig:
    method: str = "krylov"
    m_max: Optional[int] = None       # None => min(K, 30)
    tol: float = 1e-12
    breakdown_tol: float = 1e-14
    dense_cutoff: int = 256           # плотный запасной путь только для K <= cutoff

    def __post_init__(self):
        if self.method not in MATFUN_METHODS:
            raise ValueError(f"Неизвестный метод matfun: {self.method!r}")
        if self.m_max is not None and int(self.m_max) < 1:
            raise ValueError("m_max должен быть >= 1")
        if not self.tol > 0 or not self.breakdown_tol > 0:
            raise ValueError("Допуски Krylov должны быть положительными")

    def krylov_dim(self, n: int) -> int:
        return min(int(n), int(self.m_max) if self.m_max is not None else 30)


@dataclass(frozen=True)
class ArnoldiFactorization:
    V: np.ndarray       # n x m_eff, ортонормированные столбцы
    H: np.ndarray       # m_eff x m_eff, верхняя хессенбергова
    m_eff: int
    beta: float
    breakdown: bool
    h_next: float       # h_{m_eff+1, m_eff}


def _as_matvec(apply_A: Operator) -> Callable[[np.ndarray], np.ndarray]:
    if callable(apply_A):
        return apply_A
    return lambda v: apply_A @ v


def _to_dense(A: Operator, n: int) -> np.ndarray:
    if sp.issparse(A):
        return A.toarray()
    if isinstance(A, np.ndarray):
        return A
    matvec = _as_matvec(A)
    return np.column_stack([matvec(e) for e in np.eye(n)])


def _check_square_finite(M) -> np.ndarray:
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError(f"Ожидается квадратная матрица, получено shape={M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("Матрица содержит нечисловые элементы (inf/nan)")
    return M


# ---------------- dense ----------------

def dense_expm(M) -> np.ndarray:
    """exp(M): scaling-and-squaring с аппроксимацией Паде (scipy.linalg.expm)."""
    return scipy.linalg.expm(_check_square_finite(M))


def dense_phi1(M) -> np.ndarray:
    """
    phi1(M) = M^{-1} (exp(M) - I) без обращения M:
    exp([[M, I], [0, 0]]) содержит phi1(M) в правом верхнем блоке.
    """
    M = _check_square_finite(M)
    n = M.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = M
    aug[:n, n:] = np.eye(n)
    return scipy.linalg.expm(aug)[:n, n:]


# ---------------- Krylov ----------------

def arnoldi(apply_A: Operator, seed, m: int, breakdown_tol: float = 1e-14) -> ArnoldiFactorization:
    """
    Арнольди с модифицированным Грамом-Шмидтом (плюс один проход переортогонализации).
    Останавливается раньше m, если поддиагональный элемент меньше
    breakdown_tol * max(beta, ||A v_j||).
    """
    matvec = _as_matvec(apply_A)
    x = np.asarray(seed, dtype=float).ravel()
    n = x.size
    beta = float(np.linalg.norm(x))
    if beta == 0.0:
        raise ValueError("Нулевой начальный вектор для Арнольди")
    if not 1 <= int(m) <= n:
        raise ValueError(f"Размерность подпространства вне диапазона: m={m}, n={n}")
    m = int(m)

    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = x / beta

    m_eff = m
    breakdown = False
    for j in range(m):
        w = np.array(matvec(V[:, j]), dtype=float).ravel()
        w_norm = float(np.linalg.norm(w))
        for _ in range(2):
            for i in range(j + 1):
                h = float(V[:, i] @ w)
                H[i, j] += h
                w -= h * V[:, i]

        h_next = float(np.linalg.norm(w))
        H[j + 1, j] = h_next
        if h_next <= breakdown_tol * max(beta, w_norm):
            m_eff = j + 1
            breakdown = True
            break
        V[:, j + 1] = w / h_next

    return ArnoldiFactorization(
        V=V[:, :m_eff].copy(),
        H=H[:m_eff, :m_eff].copy(),
        m_eff=m_eff,
        beta=beta,
        breakdown=breakdown,
        h_next=float(H[m_eff, m_eff - 1]),
    )


def _phi_columns(M: np.ndarray) -> np.ndarray:
    """
    Столбцы exp(M) e1, phi1(M) e1, phi2(M) e1 одной экспонентой расширенной матрицы
    [[M, e1, 0], [0, 0, 1], [0, 0, 0]] размера m + 2.
    """
    m = M.shape[0]
    aug = np.zeros((m + 2, m + 2))
    aug[:m, :m] = M
    aug[0, m] = 1.0
    aug[m, m + 1] = 1.0
    E = dense_expm(aug)
    return np.column_stack([E[:m, 0], E[:m, m], E[:m, m + 1]])


def _krylov_action(order: int, apply_A: Operator, t: float, x, m_max: int, tol: float,
                   breakdown_tol: float) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.isfinite(t) or not np.all(np.isfinite(x)):
        raise ValueError("Нечисловые t или x в Krylov-приближении")
    beta = float(np.linalg.norm(x))
    if beta == 0.0:
        return np.zeros_like(x)

    n = x.size
    fact = arnoldi(apply_A, x, min(int(m_max), n), breakdown_tol)

    # невязка: beta * |t| * h_{m+1,m} * |phi_{order+1}(tH_m)[m, 1]|
    estimate = np.inf
    for m in range(1, fact.m_eff + 1):
        cols = _phi_columns(t * fact.H[:m, :m])
        sub = fact.H[m, m - 1] if m < fact.m_eff else fact.h_next
        exact = m == fact.m_eff and (fact.breakdown or m == n)
        estimate = beta * abs(t) * sub * abs(cols[m - 1, order + 1])
        if exact or estimate <= tol * beta:
            return beta * (fact.V[:, :m] @ cols[:, order])

    raise KrylovConvergenceError(estimate / beta, fact.m_eff)


def expm_action(apply_A: Operator, t: float, x, m_max: int = 30, tol: float = 1e-12,
                breakdown_tol: float = 1e-14) -> np.ndarray:
    """exp(tA) x ~ beta V_m exp(t H_m) e1, m выбирается адаптивно до m_max."""
    return _krylov_action(0, apply_A, t, x, m_max, tol, breakdown_tol)


def phi1_action(apply_A: Operator, t: float, x, m_max: int = 30, tol: float = 1e-12,
                breakdown_tol: float = 1e-14) -> np.ndarray:
    """phi1(tA) x ~ beta V_m phi1(t H_m) e1."""
    return _krylov_action(1, apply_A, t, x, m_max, tol, breakdown_tol)


# ---------------- dispatch ----------------

def matrix_function_action(kind: str, A: Operator, t: float, x, cfg: MatfunConfig) -> np.ndarray:
    """
    kind in {"expm", "phi1"}. Krylov по умолчанию; при несходимости и
    K <= cfg.dense_cutoff считаем плотно.
    """
    if kind not in ("expm", "phi1"):
        raise ValueError(f"Неизвестная матричная функция: {kind!r}")
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    dense_fun = dense_expm if kind == "expm" else dense_phi1

    if cfg.method == "dense":
        return dense_fun(t * _to_dense(A, n)) @ x

    krylov_fun = expm_action if kind == "expm" else phi1_action
    try:
        return krylov_fun(A, t, x, cfg.krylov_dim(n), cfg.tol, cfg.breakdown_tol)
    except KrylovConvergenceError as e:
        if n > cfg.dense_cutoff:
            raise
        logger.debug("%s; плотный расчёт для K=%d", e, n)
        return dense_fun(t * _to_dense(A, n)) @ x
