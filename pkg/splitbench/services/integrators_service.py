# splitbench/services/integrators_service.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from splitbench.services.grid_service import as_state
from splitbench.services.matfun_service import (
    KrylovConvergenceError,
    MatfunConfig,
    dense_expm,
    dense_phi1,
    expm_action,
    matrix_function_action,
    phi1_action,
)
from splitbench.services.model_service import LinearPart

logger = logging.getLogger(__name__)

Rhs = Callable[[np.ndarray, float], np.ndarray]

_DEFAULT_MATFUN = MatfunConfig()


@dataclass(frozen=True)
class StepContext:
    t: float
    dt: float

    def __post_init__(self):
        if not float(self.dt) > 0.0:
            raise ValueError(f"Шаг по времени должен быть положительным: dt={self.dt}")


def _require_dt(dt: float) -> float:
    dt = float(dt)
    if not dt > 0.0:
        raise ValueError(f"Шаг по времени должен быть положительным: dt={dt}")
    return dt


def exact_linear_flow(lp: LinearPart, y, dt: float, cfg: MatfunConfig = _DEFAULT_MATFUN) -> np.ndarray:
    """
    Точное решение y' = A y + b на шаге dt при постоянных (A, b):
    exp(dt A) y + dt phi1(dt A) b.
    """
    dt = _require_dt(dt)
    y = as_state(y, name="y")
    return (
        matrix_function_action("expm", lp.A, dt, y, cfg)
        + dt * matrix_function_action("phi1", lp.A, dt, lp.b, cfg)
    )


def exponential_midpoint_step(lin_at: Callable[[float], LinearPart], y, ctx: StepContext,
                              cfg: MatfunConfig = _DEFAULT_MATFUN) -> np.ndarray:
    # (A, b) замораживаются в середине шага
    return exact_linear_flow(lin_at(ctx.t + 0.5 * ctx.dt), y, ctx.dt, cfg)


def heun_step(rhs: Rhs, y, ctx: StepContext) -> np.ndarray:
    y = as_state(y, name="y")
    k1 = rhs(y, ctx.t)
    k2 = rhs(y + ctx.dt * k1, ctx.t + ctx.dt)
    return y + (0.5 * ctx.dt) * (k1 + k2)


def rk4_step(rhs: Rhs, y, ctx: StepContext) -> np.ndarray:
    y = as_state(y, name="y")
    t, dt = ctx.t, ctx.dt
    half = 0.5 * dt
    k1 = rhs(y, t)
    k2 = rhs(y + half * k1, t + half)
    k3 = rhs(y + half * k2, t + half)
    k4 = rhs(y + dt * k3, t + dt)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class LinearPropagator:
    """
    exact_linear_flow для фиксированных (A, b) и шага dt с кэшированием.
    Сначала Krylov; если он не сходится (и K <= dense_cutoff), один раз строятся
    плотные exp(dt A) и dt phi1(dt A) b, дальше только умножение.
    """

    def __init__(self, lp: LinearPart, dt: float, cfg: MatfunConfig = _DEFAULT_MATFUN):
        self.lp = lp
        self.dt = _require_dt(dt)
        self.cfg = cfg
        self._E: Optional[np.ndarray] = None
        self._source: Optional[np.ndarray] = None
        if cfg.method == "dense":
            self._build_dense()

    @property
    def is_dense(self) -> bool:
        return self._E is not None

    def _build_dense(self) -> None:
        M = self.dt * self.lp.A.toarray()
        self._E = dense_expm(M)
        self._source = self.dt * (dense_phi1(M) @ self.lp.b)

    def _krylov(self, y: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        m = cfg.krylov_dim(y.size)
        if self._source is None:
            self._source = self.dt * phi1_action(self.lp.A, self.dt, self.lp.b, m, cfg.tol, cfg.breakdown_tol)
        return expm_action(self.lp.A, self.dt, y, m, cfg.tol, cfg.breakdown_tol) + self._source

    def __call__(self, y) -> np.ndarray:
        y = as_state(y, name="y")
        if self._E is None:
            try:
                return self._krylov(y)
            except KrylovConvergenceError as e:
                if y.size > self.cfg.dense_cutoff:
                    raise
                logger.info("%s (dt=%g, K=%d): переход на плотные матрицы", e, self.dt, y.size)
                self._build_dense()
        return self._E @ y + self._source
