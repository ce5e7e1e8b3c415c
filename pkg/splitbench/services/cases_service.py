# splitbench/services/cases_service.py
from __future__ import annotations

import numpy as np

from splitbench.services.grid_service import build_grid
from splitbench.services.model_service import ProblemSpec

CASE_NAMES = ("case1", "case2", "custom", "moving")


def _const(value: float):
    value = float(value)
    return lambda t: value


def _zero(t: float) -> float:
    return 0.0


def custom_problem(
    *,
    K: int,
    b1: float,
    b2: float,
    length: float = 1.0,
    amplitude: float = 0.0,
    final_time: float = 0.1,
    name: str = "custom",
) -> ProblemSpec:
    """
    Постоянные граничные данные, начальный профиль z(0, x) + amplitude * sin(pi x / L).
    """
    grid = build_grid(length, K)
    L = grid.length
    slope = (float(b2) - float(b1)) / L

    def u0(x):
        x = np.asarray(x, dtype=float)
        return slope * x + float(b1) + float(amplitude) * np.sin(np.pi * x / L)

    return ProblemSpec(
        grid=grid,
        b1=_const(b1),
        b2=_const(b2),
        b1_dot=_zero,
        b2_dot=_zero,
        initial_profile=u0,
        final_time=float(final_time),
        constant_boundary=True,
        name=name,
    )


def case1_problem(*, K: int = 199, final_time: float = 0.1) -> ProblemSpec:
    # u(t,0) = u(t,1) = 1, u0 = 2 sin(pi x) + 1
    return custom_problem(K=K, b1=1.0, b2=1.0, amplitude=2.0, final_time=final_time, name="case1")


def case2_problem(*, K: int = 199, b1: float = 1.0, b2: float = 3.0, final_time: float = 0.1) -> ProblemSpec:
    # u0 совпадает с подъёмом z: u~0 = 0
    return custom_problem(K=K, b1=b1, b2=b2, amplitude=0.0, final_time=final_time, name="case2")


def moving_problem(
    *,
    K: int = 199,
    b1: float = 1.0,
    b2: float = 3.0,
    omega: float = 10.0,
    amplitude: float = 2.0,
    length: float = 1.0,
    final_time: float = 0.1,
) -> ProblemSpec:
    """Граничные данные b1 + sin(omega t), b2 - sin(omega t)."""
    grid = build_grid(length, K)
    L = grid.length
    b1, b2, omega = float(b1), float(b2), float(omega)

    def left(t):
        return b1 + np.sin(omega * t)

    def right(t):
        return b2 - np.sin(omega * t)

    def u0(x):
        x = np.asarray(x, dtype=float)
        return (b2 - b1) / L * x + b1 + float(amplitude) * np.sin(np.pi * x / L)

    return ProblemSpec(
        grid=grid,
        b1=left,
        b2=right,
        b1_dot=lambda t: omega * np.cos(omega * t),
        b2_dot=lambda t: -omega * np.cos(omega * t),
        initial_profile=u0,
        final_time=float(final_time),
        constant_boundary=False,
        name="moving",
    )


def build_problem(
    case: str,
    *,
    K: int,
    final_time: float,
    b1: float = 1.0,
    b2: float = 3.0,
    length: float = 1.0,
    amplitude: float = 0.0,
    omega: float = 10.0,
) -> ProblemSpec:
    case = (case or "").strip().lower()
    if case == "case1":
        return case1_problem(K=K, final_time=final_time)
    if case == "case2":
        return case2_problem(K=K, b1=b1, b2=b2, final_time=final_time)
    if case == "custom":
        return custom_problem(K=K, b1=b1, b2=b2, length=length, amplitude=amplitude, final_time=final_time)
    if case == "moving":
        return moving_problem(K=K, b1=b1, b2=b2, omega=omega, length=length, final_time=final_time)
    raise ValueError(f"Неизвестная задача: {case!r}, допустимо: {', '.join(CASE_NAMES)}")
