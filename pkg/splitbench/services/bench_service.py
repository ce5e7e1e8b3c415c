# splitbench/services/bench_service.py
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from splitbench.services.cases_service import build_problem
from splitbench.services.grid_service import as_state
from splitbench.services.integrators_service import StepContext, rk4_step
from splitbench.services.matfun_service import KrylovConvergenceError
from splitbench.services.model_service import ProblemSpec, full_rhs, initial_state
from splitbench.services.splitting_service import (
    BlowUpError,
    SchemeConfig,
    SchemeKind,
    advance,
    check_blowup,
    steps_for,
)
from splitbench.settings_manager import BenchConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorRow:
    scheme: str
    dt: float
    linf_error: float                       # nan для разрушившихся прогонов
    observed_order: Optional[float] = None
    failed: bool = False


@dataclass
class ErrorTable:
    rows: List[ErrorRow] = field(default_factory=list)

    def schemes(self) -> List[str]:
        return list(dict.fromkeys(r.scheme for r in self.rows))

    def rows_for(self, scheme: str) -> List[ErrorRow]:
        return [r for r in self.rows if r.scheme == scheme]


def _is_halving(dt_prev: float, dt: float) -> bool:
    return abs(dt_prev / dt - 2.0) <= 1e-9


def build_error_table(rows: Sequence[ErrorRow]) -> ErrorTable:
    """
    Сортирует строки по убыванию dt внутри схемы и заполняет observed_order
    только между соседними делениями шага пополам (и только для успешных прогонов).
    """
    order = list(dict.fromkeys(r.scheme for r in rows))
    out: List[ErrorRow] = []
    for scheme in order:
        group = sorted((r for r in rows if r.scheme == scheme), key=lambda r: -r.dt)
        prev: Optional[ErrorRow] = None
        for r in group:
            rate = None
            if (
                prev is not None
                and not prev.failed
                and not r.failed
                and _is_halving(prev.dt, r.dt)
                and prev.linf_error > 0
                and r.linf_error > 0
            ):
                rate = math.log2(prev.linf_error / r.linf_error)
            out.append(replace(r, observed_order=rate))
            prev = r
    return ErrorTable(rows=out)


def linf_error(U, V) -> float:
    U = as_state(U, name="U")
    V = as_state(V, name="V")
    if U.shape != V.shape:
        raise ValueError(f"Длины векторов не совпадают: {U.shape} и {V.shape}")
    return float(np.max(np.abs(U - V)))


def run_reference(spec: ProblemSpec, dt_ref: float, u0: Optional[np.ndarray] = None) -> np.ndarray:
    """Эталон: RK4 для полной полудискретной задачи от 0 до T с шагом dt_ref."""
    n_steps = steps_for(spec.final_time, dt_ref)
    y = initial_state(spec) if u0 is None else as_state(u0, name="u0").copy()

    def rhs(u, t):
        return full_rhs(u, t, spec)

    for n in range(n_steps):
        y = rk4_step(rhs, y, StepContext(n * dt_ref, dt_ref))
        check_blowup(y, n)
    return y


def _run_one(spec: ProblemSpec, cfg: SchemeConfig, dt: float, reference: np.ndarray) -> ErrorRow:
    scheme = SchemeKind(cfg.scheme).value
    try:
        u = advance(initial_state(spec), spec, cfg, dt, steps_for(spec.final_time, dt))
    except (BlowUpError, KrylovConvergenceError) as e:
        logger.warning("%s dt=%g: %s", scheme, dt, e)
        return ErrorRow(scheme=scheme, dt=dt, linf_error=float("nan"), failed=True)
    err = linf_error(u, reference)
    logger.info("%s dt=%g: ошибка %.6e", scheme, dt, err)
    return ErrorRow(scheme=scheme, dt=dt, linf_error=err)


def problem_for(cfg: BenchConfig) -> ProblemSpec:
    return build_problem(
        cfg.case,
        K=cfg.grid_k,
        final_time=cfg.final_time,
        b1=cfg.b1,
        b2=cfg.b2,
        length=cfg.length,
        amplitude=cfg.amplitude,
        omega=cfg.omega,
    )


def convergence_study(cfg: BenchConfig, reference: Optional[np.ndarray] = None) -> ErrorTable:
    spec = problem_for(cfg)
    if reference is None:
        logger.info("Эталон: %s, K=%d, RK4 dt_ref=%g", spec.name, spec.grid.interior_count, cfg.dt_ref)
        reference = run_reference(spec, cfg.dt_ref)

    jobs = [(cfg.scheme_config(s), dt) for s in cfg.schemes for dt in cfg.dt_list]
    logger.info("Серия: %d прогонов, схемы %s", len(jobs), ", ".join(SchemeKind(s).value for s in cfg.schemes))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(lambda job: _run_one(spec, job[0], job[1], reference), jobs))
    else:
        rows = [_run_one(spec, sc, dt, reference) for sc, dt in jobs]

    return build_error_table(rows)


def tail_rows(table: ErrorTable, scheme: str, tail: int = 5) -> List[ErrorRow]:
    """Последние tail успешных строк схемы с положительной ошибкой."""
    return [r for r in table.rows_for(scheme) if not r.failed and r.linf_error > 0][-int(tail):]


def fit_order(rows: Sequence[ErrorRow]) -> float:
    # наклон МНК log(error) от log(dt)
    if len(rows) < 2:
        raise ValueError(f"Для оценки порядка нужно >= 2 строк, получено {len(rows)}")
    x = np.log([r.dt for r in rows])
    y = np.log([r.linf_error for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def estimate_order(table: ErrorTable, tail: int = 5) -> Dict[str, float]:
    """
    Наклон МНК log(error) от log(dt) по последним tail успешным строкам каждой схемы.
    """
    if int(tail) < 2:
        raise ValueError("tail должен быть >= 2")
    slopes: Dict[str, float] = {}
    for scheme in table.schemes():
        ok = tail_rows(table, scheme, tail)
        if len(ok) < int(tail):
            raise ValueError(f"{scheme}: недостаточно строк для оценки порядка ({len(ok)} < {tail})")
        slopes[scheme] = fit_order(ok)
    return slopes
