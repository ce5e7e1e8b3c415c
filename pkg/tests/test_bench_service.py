from __future__ import annotations

import math

import numpy as np
import pytest

from splitbench.services import bench_service
from splitbench.services.bench_service import (
    ErrorRow,
    build_error_table,
    convergence_study,
    estimate_order,
    fit_order,
    linf_error,
    run_reference,
)
from splitbench.services.cases_service import case1_problem, custom_problem
from splitbench.services.matfun_service import KrylovConvergenceError
from splitbench.services.splitting_service import BlowUpError, SchemeKind
from splitbench.settings_manager import make_config

SMALL = dict(case="case1", grid_k=9, final_time=0.01, dt_list=[0.01, 0.005, 0.0025], dt_ref=2.5e-5)


def test_linf_error_examples():
    assert linf_error([1.0, 2.0, 3.0], [1.0, 2.5, 2.0]) == 1.0
    assert linf_error([0.0], [0.0]) == 0.0
    with pytest.raises(ValueError):
        linf_error([1.0, 2.0], [1.0])


def test_build_error_table_orders_and_rates():
    rows = [
        ErrorRow("modified", 0.025, 1e-4 / 16),
        ErrorRow("modified", 0.1, 1e-4),
        ErrorRow("modified", 0.05, 1e-4 / 4),
        ErrorRow("naive", 0.1, 1e-2),
        ErrorRow("naive", 0.05, math.nan, failed=True),
        ErrorRow("naive", 0.025, 2.5e-3),
    ]
    table = build_error_table(rows)

    assert table.schemes() == ["modified", "naive"]
    mod = table.rows_for("modified")
    assert [r.dt for r in mod] == [0.1, 0.05, 0.025]
    assert mod[0].observed_order is None
    assert mod[1].observed_order == pytest.approx(2.0)
    assert mod[2].observed_order == pytest.approx(2.0)

    naive = table.rows_for("naive")
    assert [r.observed_order for r in naive] == [None, None, None]


def test_build_error_table_skips_non_halving_steps():
    table = build_error_table([ErrorRow("naive", 0.1, 1e-2), ErrorRow("naive", 0.025, 1e-3)])
    assert [r.observed_order for r in table.rows] == [None, None]


def test_estimate_order_synthetic():
    dts = [0.1 / 2 ** i for i in range(8)]
    rows = [ErrorRow("modified", dt, 3.0 * dt ** 2) for dt in dts] + [ErrorRow("naive", dt, 0.5 * dt) for dt in dts]
    slopes = estimate_order(build_error_table(rows))
    assert slopes["modified"] == pytest.approx(2.0, abs=1e-10)
    assert slopes["naive"] == pytest.approx(1.0, abs=1e-10)


def test_estimate_order_reference_rows():
    errors = {
        0.0125: 3.436465627320029e-4,
        0.00625: 8.55649602944375e-5,
        0.003125: 2.124875639153423e-5,
        0.0015625: 5.323813066615557e-6,
        0.00078125: 1.331847065744185e-6,
    }
    table = build_error_table([ErrorRow("modified", dt, e) for dt, e in errors.items()])
    assert estimate_order(table)["modified"] == pytest.approx(2.0, abs=0.02)


def test_estimate_order_needs_enough_rows():
    table = build_error_table([ErrorRow("naive", 0.1, 1e-2), ErrorRow("naive", 0.05, 5e-3)])
    with pytest.raises(ValueError):
        estimate_order(table)
    with pytest.raises(ValueError):
        estimate_order(table, tail=1)


def test_run_reference_trivial_states():
    spec = custom_problem(K=9, b1=0.0, b2=0.0, amplitude=0.0, final_time=0.01)
    np.testing.assert_array_equal(run_reference(spec, 1e-4), np.zeros(9))

    spec = custom_problem(K=9, b1=1.0, b2=1.0, amplitude=0.0, final_time=0.01)
    np.testing.assert_array_equal(run_reference(spec, 1e-4), np.ones(9))


def test_convergence_study_small_grid():
    cfg = make_config(**SMALL)
    table = convergence_study(cfg)

    assert table.schemes() == ["naive", "modified"]
    for scheme in table.schemes():
        rows = table.rows_for(scheme)
        assert [r.dt for r in rows] == [0.01, 0.005, 0.0025]
        assert all(not r.failed and np.isfinite(r.linf_error) and r.linf_error > 0 for r in rows)
        assert rows[0].observed_order is None
        assert all(r.observed_order is not None for r in rows[1:])
        assert rows[-1].linf_error < rows[0].linf_error


def test_convergence_study_is_deterministic():
    cfg = make_config(**SMALL)
    spec = bench_service.problem_for(cfg)
    reference = run_reference(spec, cfg.dt_ref)

    serial = convergence_study(cfg, reference)
    again = convergence_study(cfg, reference)
    threaded = convergence_study(make_config(**SMALL, workers=3), reference)
    assert serial.rows == again.rows
    assert serial.rows == threaded.rows


def test_blowup_becomes_failed_row(monkeypatch):
    original = bench_service.advance

    def fragile(state, spec, cfg, dt, n_steps):
        if SchemeKind(cfg.scheme) is SchemeKind.NAIVE_STRANG and dt == 0.005:
            raise BlowUpError(1, 1e9)
        return original(state, spec, cfg, dt, n_steps)

    monkeypatch.setattr(bench_service, "advance", fragile)
    table = convergence_study(make_config(**SMALL))

    naive = table.rows_for("naive")
    assert [r.failed for r in naive] == [False, True, False]
    assert math.isnan(naive[1].linf_error)
    assert [r.observed_order for r in naive] == [None, None, None]
    assert all(not r.failed for r in table.rows_for("modified"))



def test_krylov_failure_becomes_failed_row(monkeypatch, caplog):
    original = bench_service.advance

    def stalling(state, spec, cfg, dt, n_steps):
        if SchemeKind(cfg.scheme) is SchemeKind.MODIFIED_STRANG and dt == 0.01:
            raise KrylovConvergenceError(0.4156, 30)
        return original(state, spec, cfg, dt, n_steps)

    monkeypatch.setattr(bench_service, "advance", stalling)
    with caplog.at_level("WARNING", logger="splitbench.services.bench_service"):
        table = convergence_study(make_config(**SMALL))

    modified = table.rows_for("modified")
    assert [r.failed for r in modified] == [True, False, False]
    assert math.isnan(modified[0].linf_error)
    assert [r.observed_order is None for r in modified] == [True, True, False]
    assert all(not r.failed for r in table.rows_for("naive"))
    assert any("Krylov" in r.getMessage() for r in caplog.records)


def test_fit_order():
    rows = [ErrorRow("naive", dt, 0.3 * dt ** 1.5) for dt in (0.1, 0.05, 0.025)]
    assert fit_order(rows) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(ValueError):
        fit_order(rows[:1])

# ---------------- full grid ----------------

@pytest.mark.slow
def test_reference_richardson_check():
    spec = case1_problem(K=199)
    coarse = run_reference(spec, 1e-5)
    fine = run_reference(spec, 5e-6)
    assert linf_error(coarse, fine) <= 1e-10


CASE1_MODIFIED = {
    0.1: 1.39e-2,
    0.05: 4.72e-3,
    0.0125: 3.436e-4,
    0.00625: 8.556e-5,
    0.003125: 2.125e-5,
    0.0015625: 5.324e-6,
    0.00078125: 1.332e-6,
}


def _within_factor(value: float, expected: float, factor: float = 3.0) -> bool:
    return expected / factor <= value <= expected * factor


@pytest.mark.slow
def test_case1_full_study():
    cfg = make_config(case="case1", grid_k=199)
    table = convergence_study(cfg)

    modified = table.rows_for("modified")
    for r in modified[-4:]:
        assert 1.9 <= r.observed_order <= 2.1

    slopes = estimate_order(table)
    assert 1.9 <= slopes["modified"] <= 2.1
    assert 0.9 <= slopes["naive"] <= 1.6

    by_dt = {r.dt: r.linf_error for r in modified}
    for dt, expected in CASE1_MODIFIED.items():
        assert _within_factor(by_dt[dt], expected), dt
    assert _within_factor(table.rows_for("naive")[0].linf_error, 5.77e-2)


@pytest.mark.slow
def test_case2_full_study():
    cfg = make_config(case="case2", grid_k=199, b1=1.0, b2=3.0)
    table = convergence_study(cfg)

    slopes = estimate_order(table)
    assert 1.85 <= slopes["modified"] <= 2.1
    assert slopes["naive"] <= 1.6

    modified = table.rows_for("modified")
    assert _within_factor(modified[-2].linf_error, 1.577e-6)
    assert _within_factor(modified[-1].linf_error, 4.051e-7)


@pytest.mark.slow
@pytest.mark.parametrize("case", ["case1", "case2"])
def test_orders_do_not_depend_on_reference_step(case):
    coarse = estimate_order(convergence_study(make_config(case=case, grid_k=199, dt_ref=5e-6)))
    fine = estimate_order(convergence_study(make_config(case=case, grid_k=199, dt_ref=2.5e-6)))
    assert abs(coarse["modified"] - fine["modified"]) < 0.02
