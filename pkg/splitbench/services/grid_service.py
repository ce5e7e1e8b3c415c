# splitbench/services/grid_service.py
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    length: float
    interior_count: int
    spacing: float

    @property
    def nodes(self) -> np.ndarray:
        """Внутренние узлы x_k = k*dx, k = 1..K (граничные узлы не хранятся)."""
        return self.spacing * np.arange(1, self.interior_count + 1, dtype=float)


def build_grid(L: float, K: int) -> Grid1D:
    L = float(L)
    if not L > 0.0:
        raise ValueError(f"Длина области должна быть положительной: L={L}")
    if int(K) != K or int(K) < 1:
        raise ValueError(f"Число внутренних узлов должно быть >= 1: K={K}")
    K = int(K)
    return Grid1D(length=L, interior_count=K, spacing=L / (K + 1))


def as_state(values, *, name: str = "values") -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name}: ожидается непустой одномерный вектор, получено shape={v.shape}")
    return v


def _require_spacing(dx: float) -> float:
    dx = float(dx)
    if not dx > 0.0:
        raise ValueError(f"Шаг сетки должен быть положительным: dx={dx}")
    return dx


def diff1(values, left: float, right: float, dx: float) -> np.ndarray:
    """
    Центральная первая разность (v[k+1] - v[k-1]) / (2 dx).
    Граничные значения left/right подставляются вместо v[0] и v[K+1].
    """
    dx = _require_spacing(dx)
    v = as_state(values)

    out = np.empty_like(v)
    if v.size == 1:
        out[0] = right - left
    else:
        out[1:-1] = v[2:] - v[:-2]
        out[0] = v[1] - left
        out[-1] = right - v[-2]
    out /= 2.0 * dx
    return out


def diff2(values, left: float, right: float, dx: float) -> np.ndarray:
    """Центральная вторая разность (v[k+1] - 2 v[k] + v[k-1]) / dx^2."""
    dx = _require_spacing(dx)
    v = as_state(values)

    out = -2.0 * v
    out[1:] += v[:-1]
    out[:-1] += v[1:]
    out[0] += left
    out[-1] += right
    out /= dx * dx
    return out
