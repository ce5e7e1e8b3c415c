# splitbench/services/splitting_service.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional

import numpy as np

from splitbench.services.grid_service import as_state
from splitbench.services.integrators_service import (
    LinearPropagator,
    StepContext,
    exact_linear_flow,
    exponential_midpoint_step,
    heun_step,
)
from splitbench.services.matfun_service import MatfunConfig
from splitbench.services.model_service import (
    LinearPart,
    ProblemSpec,
    dehomogenize,
    homogenize,
    lifted_linear_parts,
    lifted_w_rhs,
    lifting_profile,
    modified_linear_parts,
    modified_w_rhs,
    naive_heat_parts,
    naive_w_rhs,
)

logger = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e8

Flow = Callable[[np.ndarray, float, float], np.ndarray]   # (y, t, h) -> y(t + h)
PartsFn = Callable[[ProblemSpec, float], LinearPart]
PropagatorCache = Dict[float, LinearPropagator]


class SchemeKind(str, Enum):
    NAIVE_STRANG = "naive"
    MODIFIED_STRANG = "modified"
    LIFTED_STRANG = "lifted"


class Ordering(str, Enum):
    LINEAR_OUTSIDE = "linear-outside"         # psi1(h/2) o psi2(h) o psi1(h/2)
    NONLINEAR_OUTSIDE = "nonlinear-outside"   # psi2(h/2) o psi1(h) o psi2(h/2)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: SchemeKind = SchemeKind.MODIFIED_STRANG
    ordering: Ordering = Ordering.LINEAR_OUTSIDE
    matfun: MatfunConfig = field(default_factory=MatfunConfig)


class BlowUpError(RuntimeError):
    def __init__(self, step_index: Optional[int], magnitude: float):
        where = f"на шаге {step_index}" if step_index is not None else "на шаге"
        super().__init__(f"Решение разрушилось {where}: max|u| = {magnitude:.3e}")
        self.step_index = step_index
        self.magnitude = magnitude


def check_blowup(y: np.ndarray, step_index: Optional[int] = None) -> None:
    if not np.all(np.isfinite(y)):
        raise BlowUpError(step_index, float("inf"))
    magnitude = float(np.max(np.abs(y)))
    if magnitude > BLOWUP_THRESHOLD:
        raise BlowUpError(step_index, magnitude)


# ---------------- sub-flows ----------------

def _linear_flow(spec: ProblemSpec, cfg: SchemeConfig, parts_fn: PartsFn, *, midpoint: bool,
                 cache: Optional[PropagatorCache]) -> Flow:
    """
    Линейный подпоток. Постоянные граничные данные: точная формула (с кэшем по шагу,
    если он передан). Иначе: экспоненциальная середина (midpoint=True) или
    (A, b) на начало подшага.
    """
    def flow(y: np.ndarray, s: float, h: float) -> np.ndarray:
        if spec.constant_boundary:
            if cache is None:
                return exact_linear_flow(parts_fn(spec, s), y, h, cfg.matfun)
            prop = cache.get(h)
            if prop is None:
                prop = cache[h] = LinearPropagator(parts_fn(spec, s), h, cfg.matfun)
            return prop(y)
        if midpoint:
            return exponential_midpoint_step(lambda tau: parts_fn(spec, tau), y, StepContext(s, h), cfg.matfun)
        return exact_linear_flow(parts_fn(spec, s), y, h, cfg.matfun)

    return flow


def _heun_flow(spec: ProblemSpec, rhs) -> Flow:
    def flow(y: np.ndarray, s: float, h: float) -> np.ndarray:
        return heun_step(lambda w, tau: rhs(w, tau, spec), y, StepContext(s, h))

    return flow


def _compose(y: np.ndarray, ctx: StepContext, linear: Flow, nonlinear: Flow, ordering: Ordering,
             step_index: Optional[int]) -> np.ndarray:
    t, dt = ctx.t, ctx.dt
    half = 0.5 * dt
    if Ordering(ordering) is Ordering.LINEAR_OUTSIDE:
        stages = ((linear, t, half), (nonlinear, t, dt), (linear, t + half, half))
    else:
        stages = ((nonlinear, t, half), (linear, t, dt), (nonlinear, t + half, half))
    # проверка после каждого подпотока: inf/nan не должны попасть в Krylov
    for flow, s, h in stages:
        y = flow(y, s, h)
        check_blowup(y, step_index)
    return y


# ---------------- step maps ----------------

def naive_strang_step(U, ctx: StepContext, spec: ProblemSpec, cfg: SchemeConfig, *,
                      cache: Optional[PropagatorCache] = None, step_index: Optional[int] = None) -> np.ndarray:
    """
    Strang для v_t = v_xx, w_t = w w_x в физических переменных; b1, b2 навязываются обоим
    подпотокам. Для переменных граничных данных источник b берётся на начало подшага.
    """
    U = as_state(U, name="U")
    linear = _linear_flow(spec, cfg, naive_heat_parts, midpoint=False, cache=cache)
    return _compose(U, ctx, linear, _heun_flow(spec, naive_w_rhs), cfg.ordering, step_index)


def modified_strang_step(Ut, ctx: StepContext, spec: ProblemSpec, cfg: SchemeConfig, *,
                         cache: Optional[PropagatorCache] = None, step_index: Optional[int] = None) -> np.ndarray:
    """
    Модифицированный Strang для u~ = u - z:
        v~_t = v~_xx + z (v~_x + z_x) - z_t,
        w~_t = w~ (w~_x + z_x).
    Оба подпотока сохраняют нулевые граничные значения.
    """
    Ut = as_state(Ut, name="Ut")
    linear = _linear_flow(spec, cfg, modified_linear_parts, midpoint=True, cache=cache)
    return _compose(Ut, ctx, linear, _heun_flow(spec, modified_w_rhs), cfg.ordering, step_index)


def lifted_strang_step(Ut, ctx: StepContext, spec: ProblemSpec, cfg: SchemeConfig, *,
                       cache: Optional[PropagatorCache] = None, step_index: Optional[int] = None) -> np.ndarray:
    # простейшее разбиение однородной задачи: v~_t = v~_xx - z_t, w~_t = (w~ + z)(w~_x + z_x)
    Ut = as_state(Ut, name="Ut")
    linear = _linear_flow(spec, cfg, lifted_linear_parts, midpoint=True, cache=cache)
    return _compose(Ut, ctx, linear, _heun_flow(spec, lifted_w_rhs), cfg.ordering, step_index)


STEP_MAPS = {
    SchemeKind.NAIVE_STRANG: naive_strang_step,
    SchemeKind.MODIFIED_STRANG: modified_strang_step,
    SchemeKind.LIFTED_STRANG: lifted_strang_step,
}


def steps_for(final_time: float, dt: float) -> int:
    """Число шагов n с n*dt = T (относительная точность 1e-12), иначе ValueError."""
    if not dt > 0:
        raise ValueError(f"Шаг по времени должен быть положительным: dt={dt}")
    n = int(round(final_time / dt))
    if n < 1 or abs(n * dt - final_time) > 1e-12 * final_time:
        raise ValueError(f"Шаг dt={dt} не делит T={final_time}")
    return n


def advance(state, spec: ProblemSpec, cfg: SchemeConfig, dt: float, n_steps: int) -> np.ndarray:
    """
    n_steps шагов выбранной схемы от t=0; на входе и выходе физическое u.
    Для схем на u~ начальное состояние однородизируется один раз, в конце
    возвращается u~ + z(T).
    """
    if int(n_steps) < 1:
        raise ValueError(f"Число шагов должно быть >= 1: n_steps={n_steps}")
    n_steps = int(n_steps)
    T = float(spec.final_time)
    if abs(n_steps * dt - T) > 1e-12 * T:
        raise ValueError(f"n_steps*dt = {n_steps * dt!r} не равно T = {T!r}")

    scheme = SchemeKind(cfg.scheme)
    step = STEP_MAPS[scheme]
    homogenized = scheme is not SchemeKind.NAIVE_STRANG

    u = as_state(state, name="state")
    lift = lifting_profile(spec, 0.0)
    y = homogenize(u, lift) if homogenized else u.copy()
    cache: Optional[PropagatorCache] = {} if spec.constant_boundary else None

    for n in range(n_steps):
        ctx = StepContext(n * dt, dt)
        y = step(y, ctx, spec, cfg, cache=cache, step_index=n)
        if homogenized and not spec.constant_boundary:
            lift = lifting_profile(spec, ctx.t + dt)

    logger.debug("%s: %d шагов dt=%g", scheme.value, n_steps, dt)
    return dehomogenize(y, lift) if homogenized else y
