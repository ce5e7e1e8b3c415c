from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import List, Optional, Union

from splitbench.services.bench_service import ErrorRow, ErrorTable

CSV_HEADER = ("scheme", "dt", "linf_error", "observed_order")
FAILED_MARK = "failed"


def _fmt(x: float) -> str:
    # 17 значащих цифр: чтение CSV восстанавливает float бит в бит
    return f"{x:.16e}"


def write_error_table(table: ErrorTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table.rows:
            w.writerow([
                r.scheme,
                repr(float(r.dt)),
                FAILED_MARK if r.failed else _fmt(r.linf_error),
                "" if r.observed_order is None else _fmt(r.observed_order),
            ])
    return path


def _parse_order(s: str) -> Optional[float]:
    s = (s or "").strip()
    return float(s) if s else None


def read_error_table(path: Union[str, Path]) -> ErrorTable:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: неожиданный заголовок CSV {header!r}")

        rows: List[ErrorRow] = []
        for i, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_HEADER):
                raise ValueError(f"{path}:{i}: ожидается {len(CSV_HEADER)} полей, получено {len(rec)}")
            scheme, dt, err, order = rec
            failed = err.strip() == FAILED_MARK
            rows.append(
                ErrorRow(
                    scheme=scheme,
                    dt=float(dt),
                    linf_error=math.nan if failed else float(err),
                    observed_order=_parse_order(order),
                    failed=failed,
                )
            )
    return ErrorTable(rows=rows)
