from __future__ import annotations

from typing import List

import numpy as np

from splitbench.services.bench_service import ErrorTable, fit_order, tail_rows
from splitbench.services.model_service import ProblemSpec


def tail_order(table: ErrorTable, scheme: str, tail: int = 5) -> float:
    """Наклон МНК по последним tail успешным строкам (или по всем, если их меньше); nan при < 2."""
    ok = tail_rows(table, scheme, tail)
    if len(ok) < 2:
        return float("nan")
    return fit_order(ok)


def study_report(spec: ProblemSpec, table: ErrorTable, *, dt_ref: float, tail: int = 5) -> str:
    g = spec.grid
    lines: List[str] = [
        f"problem: {spec.name}",
        f"grid: L={g.length:g}, K={g.interior_count}, dx={g.spacing:g}",
        f"final time: {spec.final_time:g}, reference RK4 dt={dt_ref:g}",
        "",
    ]

    for scheme in table.schemes():
        lines.append(f"[{scheme}]")
        lines.append(f"  {'dt':>12}  {'linf_error':>14}  {'order':>6}")
        for r in table.rows_for(scheme):
            err = "failed" if r.failed else f"{r.linf_error:.6e}"
            order = "" if r.observed_order is None else f"{r.observed_order:.3f}"
            lines.append(f"  {r.dt:>12g}  {err:>14}  {order:>6}")

        slope = tail_order(table, scheme, tail)
        slope_txt = "n/a" if np.isnan(slope) else f"{slope:.3f}"
        lines.append(f"  least-squares order (last {tail} rows): {slope_txt}")
        lines.append("")

    return "\n".join(lines).rstrip() + "\n"
