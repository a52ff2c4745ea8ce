"""
Loading and validation of run configuration files (JSON or TOML).
"""

import json
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gapforge.driver.config import LatticeSpec, Optimize1DConfig, OptimizeConfig, SweepConfig, check_lattice
from gapforge.errors import ConfigError
import logging

logger = logging.getLogger(__name__)

THREADS_ENV = "GAPFORGE_THREADS"


class BandsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    dim: Literal[1, 2] = 2
    lattice: LatticeSpec = "square"
    n: int = Field(32, ge=4)
    X: float = Field(1.0, gt=0)
    V_plus: float = Field(100.0, ge=0)
    m: int = Field(1, ge=1)
    bands: int = Field(6, ge=2)
    potential: Literal["zero", "cosine", "random-bangbang", "disk-array", "file"] = "zero"
    potential_file: Optional[str] = None
    points_per_side: int = Field(16, ge=2)
    k_points_1d: int = Field(65, ge=2)
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    out: str = "out"

    @model_validator(mode="after")
    def _consistent(self) -> "BandsConfig":
        check_lattice(self.lattice)
        if self.potential == "file" and not self.potential_file:
            raise ValueError("potential 'file' needs potential_file")
        if self.bands < self.m + 1:
            raise ValueError(f"bands = {self.bands} cannot resolve gap {self.m}")
        if self.potential != "zero" and self.V_plus <= 0:
            raise ValueError("a nonzero potential needs V_plus > 0")
        return self


class VerifyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Optional[str] = None
    only: Optional[List[Literal["1d", "2d", "numerics"]]] = None
    full: bool = False
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    out: str = "out"


CONFIG_MODELS: Dict[str, Type[BaseModel]] = {
    "bands": BandsConfig,
    "optimize1d": Optimize1DConfig,
    "optimize2d": OptimizeConfig,
    "sweep": SweepConfig,
    "verify": VerifyConfig,
}


def _line_of(text: str, key: str) -> Optional[int]:
    pattern = re.compile(rf'(^|[\s{{,"]){re.escape(key)}"?\s*[:=]')
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.search(line):
            return number
    return None


def read_config_file(path: str) -> tuple:
    """(data, raw text) from a JSON or TOML file"""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    if p.suffix.lower() == ".toml":
        try:
            return tomllib.loads(text), text
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML in {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"Invalid JSON in {path}: {e.msg} (line {e.lineno}, column {e.colno})", line=e.lineno
        )
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain an object")
    return data, text


def load_config(command: str, path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> BaseModel:
    if command not in CONFIG_MODELS:
        raise ConfigError(f"Unknown command '{command}'", field="command")
    data, text = read_config_file(path) if path else ({}, "")
    if data.get("command") not in (None, command):
        raise ConfigError(
            f"Config is for command '{data['command']}', not '{command}'",
            field="command",
            line=_line_of(text, "command"),
        )
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    try:
        cfg = CONFIG_MODELS[command].model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        field = ".".join(str(part) for part in err["loc"]) or None
        key = next((str(part) for part in reversed(err["loc"]) if isinstance(part, str)), None)
        line = _line_of(text, key) if key else None
        where = f" (line {line})" if line else ""
        raise ConfigError(f"Invalid config field '{field}'{where}: {err['msg']}", field=field, line=line)
    logger.debug(f"Loaded {command} config from {path or 'defaults'}")
    return cfg


def resolve_threads(flag: Optional[int]) -> int:
    """--threads, then GAPFORGE_THREADS, then the machine's core count"""
    if flag is not None:
        if flag < 1:
            raise ConfigError(f"--threads must be positive, got {flag}", field="threads")
        return flag
    env = os.getenv(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got '{env}'", field=THREADS_ENV)
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be positive, got {value}", field=THREADS_ENV)
        return value
    return os.cpu_count() or 1
