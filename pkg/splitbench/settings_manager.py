from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict

from splitbench.services.matfun_service import MatfunConfig
from splitbench.services.splitting_service import Ordering, SchemeConfig, SchemeKind, steps_for

SETTINGS_FILENAME = "splitbench.json"

DEFAULT_DT_LIST = tuple(0.1 / 2 ** i for i in range(8))   # 0.1 ... 0.00078125


def exe_dir() -> Path:
    import sys
    if getattr(sys, "frozen", False):
        return Path(sys.executable).resolve().parent
    return Path(__file__).resolve().parent


DEFAULT_CONFIG_PATH = exe_dir() / SETTINGS_FILENAME


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _split_csv(v: Any) -> Any:
    if isinstance(v, str):
        return [x.strip() for x in v.split(",") if x.strip()]
    return v


class BenchConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SPLITBENCH_", extra="forbid")

    case: Literal["case1", "case2", "custom", "moving"] = "case1"
    b1: float = 1.0
    b2: float = 3.0
    length: float = Field(1.0, gt=0)
    amplitude: float = 0.0
    omega: float = 10.0

    grid_k: int = Field(199, ge=1)
    final_time: float = Field(0.1, gt=0)
    dt_list: Annotated[List[float], NoDecode] = Field(default_factory=lambda: list(DEFAULT_DT_LIST))
    # 1e-5 не проходит проверку dt_ref <= min(dt_list)/100 для списка по умолчанию
    dt_ref: float = Field(5e-6, gt=0)

    schemes: Annotated[List[SchemeKind], NoDecode] = Field(
        default_factory=lambda: [SchemeKind.NAIVE_STRANG, SchemeKind.MODIFIED_STRANG]
    )
    ordering: Ordering = Ordering.LINEAR_OUTSIDE
    out: Path = Path("results")

    matfun_method: Literal["krylov", "dense"] = "krylov"
    m_max: Optional[int] = Field(None, ge=1)
    krylov_tol: float = Field(1e-12, gt=0)
    breakdown_tol: float = Field(1e-14, gt=0)
    dense_cutoff: int = Field(256, ge=0)

    workers: int = Field(1, ge=1)

    @field_validator("case", mode="before")
    @classmethod
    def _norm_case(cls, v: Any) -> Any:
        return v.strip().lower() if isinstance(v, str) else v

    @field_validator("dt_list", mode="before")
    @classmethod
    def _parse_dt_list(cls, v: Any) -> Any:
        return _split_csv(v)

    @field_validator("dt_list")
    @classmethod
    def _check_dt_list(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("список шагов пуст")
        if any(not dt > 0 for dt in v):
            raise ValueError("шаги должны быть положительными")
        return v

    @field_validator("schemes", mode="before")
    @classmethod
    def _parse_schemes(cls, v: Any) -> Any:
        v = _split_csv(v)
        if isinstance(v, list):
            return [x.strip().lower() if isinstance(x, str) else x for x in v]
        return v

    @field_validator("schemes")
    @classmethod
    def _check_schemes(cls, v: List[SchemeKind]) -> List[SchemeKind]:
        if not v:
            raise ValueError("не выбрано ни одной схемы")
        return list(dict.fromkeys(v))

    @model_validator(mode="after")
    def _check_time_grid(self) -> "BenchConfig":
        for dt in self.dt_list:
            try:
                steps_for(self.final_time, dt)
            except ValueError as e:
                raise ConfigError("dt_list", str(e)) from None
        try:
            steps_for(self.final_time, self.dt_ref)
        except ValueError as e:
            raise ConfigError("dt_ref", str(e)) from None
        if self.dt_ref > min(self.dt_list) / 100.0 * (1.0 + 1e-12):
            raise ConfigError("dt_ref", f"dt_ref={self.dt_ref} больше min(dt_list)/100={min(self.dt_list) / 100.0}")
        return self

    def matfun_config(self) -> MatfunConfig:
        return MatfunConfig(
            method=self.matfun_method,
            m_max=self.m_max,
            tol=self.krylov_tol,
            breakdown_tol=self.breakdown_tol,
            dense_cutoff=self.dense_cutoff,
        )

    def scheme_config(self, scheme: SchemeKind) -> SchemeConfig:
        return SchemeConfig(scheme=SchemeKind(scheme), ordering=self.ordering, matfun=self.matfun_config())


def _config_error(e: ValidationError) -> ConfigError:
    err = e.errors()[0]
    original = (err.get("ctx") or {}).get("error")
    if isinstance(original, ConfigError):
        return original
    key = ".".join(str(x) for x in err.get("loc") or ()) or "config"
    return ConfigError(key, str(err.get("msg") or "недопустимое значение"))


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"{path}: некорректный JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path}: ожидается JSON-объект с ключами настроек")
    return data


def make_config(**values: Any) -> BenchConfig:
    try:
        return BenchConfig(**values)
    except ValidationError as e:
        raise _config_error(e) from None


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> BenchConfig:
    """
    JSON-файл (--config или splitbench.json рядом с exe), поверх него overrides из CLI.
    Значения None в overrides игнорируются.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"файл не найден: {path}")
        data = _read_json(path)
    elif DEFAULT_CONFIG_PATH.is_file():
        data = _read_json(DEFAULT_CONFIG_PATH)

    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return make_config(**data)
