"""
Health Check Resource Provider

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import time
from typing import Any, Dict

from ubdb.checker.report import VERDICTS
from ubdb.config import get_default_scope_bounds, get_state_budget, list_bundled_models, validate_config
from ubdb.utils.logger import get_logger
from ubdb.version import __version__

# Server start time for uptime calculation
_server_start_time = time.time()

# Metrics tracking
_metrics = {"tool_calls": {}, "tool_errors": {}, "total_calls": 0, "total_errors": 0}

# Verdicts returned by check_model and refine_check_model since start
_checking = {"verdicts": dict.fromkeys(VERDICTS, 0), "states_explored": 0, "runs": 0}


def record_tool_call(tool_name: str, success: bool, duration: float = 0.0):
    """
    Record tool call for metrics.

    Args:
        tool_name: Name of the tool
        success: Whether call succeeded
        duration: Execution duration in seconds
    """
    _metrics["total_calls"] += 1

    stats = _metrics["tool_calls"].setdefault(
        tool_name,
        {"count": 0, "success": 0, "errors": 0, "total_duration": 0.0, "avg_duration": 0.0},
    )
    stats["count"] += 1
    stats["total_duration"] += duration

    if success:
        stats["success"] += 1
    else:
        stats["errors"] += 1
        _metrics["total_errors"] += 1
        _metrics["tool_errors"][tool_name] = _metrics["tool_errors"].get(tool_name, 0) + 1

    stats["avg_duration"] = stats["total_duration"] / stats["count"]


def reset_metrics() -> None:
    _metrics["tool_calls"].clear()
    _metrics["tool_errors"].clear()
    _metrics["total_calls"] = 0
    _metrics["total_errors"] = 0
    _checking["verdicts"] = dict.fromkeys(VERDICTS, 0)
    _checking["states_explored"] = 0
    _checking["runs"] = 0


def record_verdicts(summary: Dict[str, int], states: int) -> None:
    """Add one checking run's verdict counts and explored states"""
    _checking["runs"] += 1
    _checking["states_explored"] += states
    for verdict, count in summary.items():
        _checking["verdicts"][verdict] = _checking["verdicts"].get(verdict, 0) + count


def _success_rate() -> float:
    if _metrics["total_calls"] == 0:
        return 0.0
    return (_metrics["total_calls"] - _metrics["total_errors"]) / _metrics["total_calls"] * 100


def _optional_features() -> Dict[str, bool]:
    try:
        from ubdb.tools.class_diagram import HAS_MATPLOTLIB
    except Exception:
        HAS_MATPLOTLIB = False
    return {"class_diagrams": HAS_MATPLOTLIB}


def _checking_defaults(config_valid: bool) -> Dict[str, Any]:
    if not config_valid:
        return {}
    return {"default_state_budget": get_state_budget(), "default_scope": get_default_scope_bounds()}


def get_health_status() -> Dict[str, Any]:
    """
    Get health status of the MCP server.

    Returns:
        Health status dictionary
    """
    logger = get_logger()

    uptime_seconds = time.time() - _server_start_time
    config_valid, config_errors = validate_config()

    try:
        models = list_bundled_models()
    except Exception as e:
        logger.warning(f"Failed to list bundled models: {e}")
        models = []

    success_rate = _success_rate()
    healthy = config_valid and (_metrics["total_calls"] == 0 or success_rate > 95)

    top_tools = sorted(_metrics["tool_calls"].items(), key=lambda x: x[1]["count"], reverse=True)[:5]

    return {
        "status": "healthy" if healthy else "degraded",
        "version": __version__,
        "uptime_seconds": int(uptime_seconds),
        "uptime_hours": round(uptime_seconds / 3600, 2),
        "server_start_time": _server_start_time,
        "configuration": {
            "valid": config_valid,
            "errors": config_errors if not config_valid else [],
        },
        "bundled_models": models,
        "features": _optional_features(),
        "checking": {
            **_checking_defaults(config_valid),
            "runs": _checking["runs"],
            "verdicts": dict(_checking["verdicts"]),
            "states_explored": _checking["states_explored"],
        },
        "metrics": {
            "total_calls": _metrics["total_calls"],
            "total_errors": _metrics["total_errors"],
            "success_rate_percent": round(success_rate, 2),
            "top_tools": [
                {
                    "tool": name,
                    "calls": data["count"],
                    "success": data["success"],
                    "errors": data["errors"],
                    "avg_duration_seconds": round(data["avg_duration"], 3),
                }
                for name, data in top_tools
            ],
        },
        "timestamp": time.time(),
    }


def get_metrics() -> Dict[str, Any]:
    """
    Get detailed metrics.

    Returns:
        Metrics dictionary
    """
    return {
        "tool_calls": {name: dict(stats) for name, stats in _metrics["tool_calls"].items()},
        "tool_errors": _metrics["tool_errors"].copy(),
        "total_calls": _metrics["total_calls"],
        "total_errors": _metrics["total_errors"],
        "success_rate": round(_success_rate(), 2),
        "verdicts": dict(_checking["verdicts"]),
        "states_explored": _checking["states_explored"],
    }
