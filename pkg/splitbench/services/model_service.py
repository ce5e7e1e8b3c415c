# splitbench/services/model_service.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from splitbench.services.grid_service import Grid1D, as_state, diff1, diff2

logger = logging.getLogger(__name__)

BoundaryFn = Callable[[float], float]
ProfileFn = Callable[[np.ndarray], np.ndarray]

# Нелинейность везде одна: f(u, u_x) = u * u_x (Бюргерс).


@dataclass(frozen=True)
class ProblemSpec:
    grid: Grid1D
    b1: BoundaryFn
    b2: BoundaryFn
    b1_dot: BoundaryFn
    b2_dot: BoundaryFn
    initial_profile: ProfileFn
    final_time: float
    constant_boundary: bool = False   # True => A(t), b(t) не зависят от t
    name: str = "custom"

    def __post_init__(self):
        if not float(self.final_time) > 0.0:
            raise ValueError(f"Конечное время должно быть положительным: T={self.final_time}")

        ends = np.asarray(self.initial_profile(np.array([0.0, self.grid.length])), dtype=float)
        left, right = float(self.b1(0.0)), float(self.b2(0.0))
        scale = max(1.0, abs(left), abs(right))
        if abs(ends[0] - left) > 1e-12 * scale or abs(ends[1] - right) > 1e-12 * scale:
            logger.warning(
                "Начальные данные задачи %s не согласованы с граничными: u0(0)=%g, b1(0)=%g, u0(L)=%g, b2(0)=%g",
                self.name, ends[0], left, ends[1], right,
            )


@dataclass(frozen=True)
class LiftingProfile:
    z_nodes: np.ndarray
    z_left: float
    z_right: float
    z_slope: float
    zt_nodes: np.ndarray


@dataclass(frozen=True)
class LinearPart:
    A: sp.csr_matrix
    b: np.ndarray

    def apply(self, y: np.ndarray) -> np.ndarray:
        return self.A @ y + self.b


def initial_state(spec: ProblemSpec) -> np.ndarray:
    return np.asarray(spec.initial_profile(spec.grid.nodes), dtype=float)


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"Длины векторов не совпадают: {a.shape} и {b.shape}")


def _z_slope(spec: ProblemSpec, t: float) -> float:
    return (float(spec.b2(t)) - float(spec.b1(t))) / spec.grid.length


def _tridiagonal(lower: np.ndarray, main: np.ndarray, upper: np.ndarray) -> sp.csr_matrix:
    K = main.size
    if K == 1:
        return sp.csr_matrix(main.reshape(1, 1))
    return sp.diags([lower, main, upper], [-1, 0, 1], shape=(K, K), format="csr")


# ---------------- lifting ----------------

def lifting_profile(spec: ProblemSpec, t: float) -> LiftingProfile:
    """
    Аффинный подъём z(t, x) = (b2(t) - b1(t)) / L * x + b1(t).
    z гармонична (z_xx = 0), поэтому u~ = u - z имеет нулевые граничные значения.
    """
    if t < 0:
        raise ValueError(f"Время должно быть неотрицательным: t={t}")

    L = spec.grid.length
    x = spec.grid.nodes
    left, right = float(spec.b1(t)), float(spec.b2(t))
    d_left, d_right = float(spec.b1_dot(t)), float(spec.b2_dot(t))
    slope = (right - left) / L

    return LiftingProfile(
        z_nodes=slope * x + left,
        z_left=left,
        z_right=right,
        z_slope=slope,
        zt_nodes=((d_right - d_left) / L) * x + d_left,
    )


def homogenize(u, lift: LiftingProfile) -> np.ndarray:
    u = as_state(u, name="u")
    _check_same_length(u, lift.z_nodes)
    return u - lift.z_nodes


def dehomogenize(ut, lift: LiftingProfile) -> np.ndarray:
    ut = as_state(ut, name="ut")
    _check_same_length(ut, lift.z_nodes)
    return ut + lift.z_nodes


# ---------------- naive decomposition: v_t = v_xx, w_t = w w_x ----------------

def naive_w_rhs(W, t: float, spec: ProblemSpec) -> np.ndarray:
    # b1(t), b2(t) навязываются w-уравнению с обеих сторон (переопределённая задача)
    W = as_state(W, name="W")
    return W * diff1(W, spec.b1(t), spec.b2(t), spec.grid.spacing)


def naive_heat_parts(spec: ProblemSpec, t: float) -> LinearPart:
    K = spec.grid.interior_count
    inv_dx2 = 1.0 / spec.grid.spacing ** 2

    off = np.full(K - 1, inv_dx2)
    A = _tridiagonal(off, np.full(K, -2.0 * inv_dx2), off)

    b = np.zeros(K)
    b[0] += float(spec.b1(t)) * inv_dx2
    b[-1] += float(spec.b2(t)) * inv_dx2
    return LinearPart(A=A, b=b)


# ---------------- modified decomposition ----------------

def modified_linear_parts(spec: ProblemSpec, t: float) -> LinearPart:
    """
    v~_t = v~_xx + z (v~_x + z_x) - z_t в компактной форме A v~ + b.
    Строка k: (1/dx^2 - Z_k/(2dx), -2/dx^2, 1/dx^2 + Z_k/(2dx)).
    """
    lift = lifting_profile(spec, t)
    dx = spec.grid.spacing
    K = spec.grid.interior_count
    Z = lift.z_nodes

    inv_dx2 = 1.0 / dx ** 2
    adv = Z / (2.0 * dx)
    A = _tridiagonal(inv_dx2 - adv[1:], np.full(K, -2.0 * inv_dx2), inv_dx2 + adv[:-1])

    return LinearPart(A=A, b=Z * lift.z_slope - lift.zt_nodes)


def modified_w_rhs(Wt, t: float, spec: ProblemSpec) -> np.ndarray:
    Wt = as_state(Wt, name="Wt")
    return Wt * (diff1(Wt, 0.0, 0.0, spec.grid.spacing) + _z_slope(spec, t))


# ---------------- lifted (simple) decomposition: v~_t = v~_xx - z_t ----------------

def lifted_linear_parts(spec: ProblemSpec, t: float) -> LinearPart:
    lift = lifting_profile(spec, t)
    K = spec.grid.interior_count
    inv_dx2 = 1.0 / spec.grid.spacing ** 2

    off = np.full(K - 1, inv_dx2)
    A = _tridiagonal(off, np.full(K, -2.0 * inv_dx2), off)
    return LinearPart(A=A, b=-lift.zt_nodes)


def lifted_w_rhs(Wt, t: float, spec: ProblemSpec) -> np.ndarray:
    Wt = as_state(Wt, name="Wt")
    lift = lifting_profile(spec, t)
    return (Wt + lift.z_nodes) * (diff1(Wt, 0.0, 0.0, spec.grid.spacing) + lift.z_slope)


# ---------------- full problem ----------------

def full_rhs(U, t: float, spec: ProblemSpec) -> np.ndarray:
    U = as_state(U, name="U")
    left, right = spec.b1(t), spec.b2(t)
    dx = spec.grid.spacing
    return diff2(U, left, right, dx) + U * diff1(U, left, right, dx)


# ---------------- boundary compatibility ----------------

def compat_residual(spec: ProblemSpec, t: float, Wt: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """
    Правая часть w~ (w~_x + z_x) модифицированного w-уравнения в точках x=0 и x=L.
    w~ там равна нулю, поэтому обе величины обязаны быть нулевыми при любом состоянии.
    """
    dx = spec.grid.spacing
    slope = _z_slope(spec, t)
    if Wt is None:
        Wt = np.zeros(spec.grid.interior_count)
    Wt = as_state(Wt, name="Wt")

    w_left = w_right = 0.0
    wx_left = (Wt[0] - w_left) / dx
    wx_right = (w_right - Wt[-1]) / dx
    return float(w_left * (wx_left + slope)), float(w_right * (wx_right + slope))


def naive_compat_residual(spec: ProblemSpec, t: float, W) -> Tuple[float, float]:
    """
    Дефект наивного w-уравнения на границе: b_i(t) * w_x - b_i'(t).
    Ноль только если граничные данные сами удовлетворяют w_t = w w_x.
    """
    W = as_state(W, name="W")
    dx = spec.grid.spacing
    left, right = float(spec.b1(t)), float(spec.b2(t))
    wx_left = (W[0] - left) / dx
    wx_right = (right - W[-1]) / dx
    return (
        float(left * wx_left - spec.b1_dot(t)),
        float(right * wx_right - spec.b2_dot(t)),
    )
