"""
Configuration management for ubdb

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import os
from pathlib import Path
from typing import Dict, List, Optional

PACKAGE_DIR = Path(__file__).resolve().parent

# Bundled .ubdb corpus
MODELS_DIR = PACKAGE_DIR / "models"

# Cache directory (logs) - can be overridden via UBDB_CACHE_DIR
CACHE_DIR = Path(os.getenv("UBDB_CACHE_DIR", str(Path.home() / ".cache" / "ubdb")))
LOGS_DIR = CACHE_DIR / "logs"

# State budget for exhaustive exploration
DEFAULT_STATE_BUDGET = 1_000_000

# Default instance counts: carrier sets typing a class vs. value-only sets
DEFAULT_CLASS_SCOPE = 2
DEFAULT_VALUE_SCOPE = 3

DEFAULT_LOG_LEVEL = "WARNING"

# SQL output
SQL_DIALECTS = ("ansi", "sqlite")
DEFAULT_SQL_DIALECT = "ansi"

_TRUE_VALUES = {"1", "true", "yes", "on"}
_FALSE_VALUES = {"0", "false", "no", "off"}


def _env_flag(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    return raw.strip().lower() not in _FALSE_VALUES


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    return int(raw)


def color_enabled(stream=None) -> bool:
    """
    Whether ANSI colour is used in text reports.

    Priority:
    1. UBDB_COLOR environment variable (0 disables, 1 forces)
    2. Whether the output stream is a terminal (when a stream is given)
    """
    raw = os.getenv("UBDB_COLOR")
    if raw is not None and raw.strip() != "":
        return raw.strip().lower() not in _FALSE_VALUES
    if stream is not None:
        isatty = getattr(stream, "isatty", None)
        return bool(isatty and isatty())
    return True


def get_state_budget(override: Optional[int] = None) -> int:
    """
    Get the state budget for exploration.

    Priority:
    1. Explicit override (command-line --budget)
    2. UBDB_BUDGET environment variable
    3. DEFAULT_STATE_BUDGET
    """
    if override is not None:
        return override
    return _env_int("UBDB_BUDGET", DEFAULT_STATE_BUDGET)


def symmetry_enabled(override: Optional[bool] = None) -> bool:
    """
    Whether exploration keeps one state per renaming of interchangeable atoms.

    Priority:
    1. Explicit override
    2. UBDB_SYMMETRY environment variable (0 disables)
    3. On
    """
    if override is not None:
        return override
    return _env_flag("UBDB_SYMMETRY", True)


def get_default_scope_bounds() -> Dict[str, int]:
    """
    Get default per-carrier bounds keyed by carrier category.

    Returns:
        {"class": N, "value": M} from UBDB_CLASS_SCOPE / UBDB_VALUE_SCOPE or defaults
    """
    return {
        "class": _env_int("UBDB_CLASS_SCOPE", DEFAULT_CLASS_SCOPE),
        "value": _env_int("UBDB_VALUE_SCOPE", DEFAULT_VALUE_SCOPE),
    }


def get_worker_count(override: Optional[int] = None) -> int:
    """Number of machines checked concurrently (UBDB_WORKERS, default 1)"""
    if override is not None:
        return override
    return _env_int("UBDB_WORKERS", 1)


def get_sql_dialect(override: Optional[str] = None) -> str:
    """
    Get the SQL dialect for generated scripts.

    Priority:
    1. Explicit override (command-line --dialect)
    2. UBDB_SQL_DIALECT environment variable
    3. DEFAULT_SQL_DIALECT
    """
    if override:
        return override
    return os.getenv("UBDB_SQL_DIALECT", DEFAULT_SQL_DIALECT).strip().lower()


def get_log_level() -> str:
    """Log level name from UBDB_LOG_LEVEL (default WARNING)"""
    return os.getenv("UBDB_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()


def log_to_file_enabled(default: bool = False) -> bool:
    """Whether file logging under CACHE_DIR/logs is enabled (UBDB_LOG_FILE)"""
    return _env_flag("UBDB_LOG_FILE", default)


def get_logs_dir() -> Path:
    """Get logs directory path"""
    return LOGS_DIR


def get_models_dir() -> Path:
    """Get the bundled model corpus directory"""
    return MODELS_DIR


def list_bundled_models() -> List[str]:
    """Names (without suffix) of the bundled .ubdb models, sorted"""
    if not MODELS_DIR.exists():
        return []
    return sorted(p.stem for p in MODELS_DIR.glob("*.ubdb"))


def get_bundled_model(name: str) -> Path:
    """Path of a bundled model by name (with or without the .ubdb suffix)"""
    stem = name[:-5] if name.endswith(".ubdb") else name
    return MODELS_DIR / f"{stem}.ubdb"


def validate_config() -> tuple:
    """Validate environment-provided settings"""
    errors = []

    for name in ("UBDB_BUDGET", "UBDB_CLASS_SCOPE", "UBDB_VALUE_SCOPE", "UBDB_WORKERS"):
        raw = os.getenv(name)
        if raw is None or raw.strip() == "":
            continue
        try:
            value = int(raw)
        except ValueError:
            errors.append(f"{name} must be an integer, got {raw!r}")
            continue
        minimum = 1 if name in ("UBDB_BUDGET", "UBDB_WORKERS") else 0
        if value < minimum:
            errors.append(f"{name} must be >= {minimum}, got {value}")

    dialect = get_sql_dialect()
    if dialect not in SQL_DIALECTS:
        errors.append(f"UBDB_SQL_DIALECT must be one of {', '.join(SQL_DIALECTS)}, got {dialect!r}")

    level = get_log_level()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        errors.append(f"UBDB_LOG_LEVEL is not a logging level: {level}")

    if not MODELS_DIR.exists():
        errors.append(f"Bundled model directory not found: {MODELS_DIR}")

    return len(errors) == 0, errors
