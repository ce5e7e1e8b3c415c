import argparse
import logging
import os
import sys
import tempfile
import traceback
from pathlib import Path
from typing import List, Optional

from splitbench.results_store import write_error_table
from splitbench.services.bench_service import convergence_study, problem_for
from splitbench.services.diagnostics_service import study_report
from splitbench.settings_manager import ConfigError, load_config

logger = logging.getLogger("splitbench")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="splitbench",
        description="Сходимость наивного и модифицированного расщепления Strang для уравнения Бюргерса.",
    )
    p.add_argument("--case", choices=["case1", "case2", "custom", "moving"])
    p.add_argument("--config", type=Path, help="плоский JSON с ключами BenchConfig")
    p.add_argument("--b1", type=float)
    p.add_argument("--b2", type=float)
    p.add_argument("--length", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--grid-k", dest="grid_k", type=int)
    p.add_argument("--final-time", dest="final_time", type=float)
    p.add_argument("--dt-list", dest="dt_list", help="через запятую, например 0.1,0.05,0.025")
    p.add_argument("--dt-ref", dest="dt_ref", type=float)
    p.add_argument("--schemes", help="через запятую: naive,modified,lifted")
    p.add_argument("--ordering", choices=["linear-outside", "nonlinear-outside"])
    p.add_argument("--matfun", dest="matfun_method", choices=["krylov", "dense"])
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse уже напечатал usage/help
        return EXIT_CONFIG if e.code else EXIT_OK

    _setup_logging(args.log_level)

    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "log_level")}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        print(f"Ошибка конфигурации: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = convergence_study(cfg)

        out_dir = Path(cfg.out)
        csv_path = write_error_table(table, out_dir / f"{cfg.case}.csv")
        report = study_report(problem_for(cfg), table, dt_ref=cfg.dt_ref)
        (out_dir / "report.txt").write_text(report, encoding="utf-8")
    except Exception as e:
        path = os.path.join(tempfile.gettempdir(), "splitbench_error.log")
        with open(path, "a", encoding="utf-8") as f:
            f.write("\n=== cli_main ERROR ===\n")
            f.write(traceback.format_exc())
        print(f"{type(e).__name__}: {e}\n\nЛог: {path}", file=sys.stderr)
        return EXIT_ERROR

    print(report, end="")
    logger.info("CSV: %s", csv_path)

    if table.rows and all(r.failed for r in table.rows):
        print("Все прогоны разрушились", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
