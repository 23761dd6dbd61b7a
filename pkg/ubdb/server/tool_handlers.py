"""
Tool Handlers for MCP Server

Contains all tool execution handlers. Results are rendered as markdown
tables; errors as JSON with suggestions.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import json
import time
from typing import Any, Dict, List, Union

from mcp.types import ImageContent, TextContent

from ubdb.resources.health import record_tool_call, record_verdicts
from ubdb.tools.model_tools import (
    check_model,
    class_diagram,
    format_model,
    generate_sql_script,
    lint_model,
    list_models,
    refine_check_model,
)
from ubdb.utils.error_helper import format_error_response
from ubdb.utils.logger import get_logger, log_tool_result

logger = get_logger()

_VERDICT_ICONS = {"holds": "✅", "violated": "❌", "scope-exhausted": "⚠️"}


def _format_reports_as_table(result: Dict[str, Any], title: str) -> str:
    """
    Format check reports as a markdown table, with counterexamples below it.

    Args:
        result: Dictionary from check_model / refine_check_model
        title: Heading

    Returns:
        Markdown text
    """
    summary = result.get("summary", {})
    scope = ", ".join(f"{k}={v}" for k, v in sorted(result.get("scope", {}).items()))
    lines = [
        f"## {title}\n",
        f"**{'All obligations hold' if result.get('all_hold') else 'Some obligations do not hold'}** "
        f"({summary.get('holds', 0)} holds, {summary.get('violated', 0)} violated, "
        f"{summary.get('scope-exhausted', 0)} scope-exhausted) at scope {scope or '(empty)'}\n",
        "| Verdict | Kind | Machine | Event | Invariant | States | Note |",
        "|---------|------|---------|-------|-----------|--------|------|",
    ]
    for record in result.get("reports", []):
        icon = _VERDICT_ICONS.get(record["verdict"], "")
        lines.append(
            f"| {icon} {record['verdict']} | {record['kind']} | {record['machine']} | "
            f"{record.get('event') or '-'} | {record.get('invariant') or '-'} | {record['states']} | "
            f"{record.get('note') or ''} |"
        )

    violated = [r for r in result.get("reports", []) if r.get("trace") is not None]
    for record in violated:
        where = "/".join(p for p in (record["machine"], record.get("event"), record.get("invariant")) if p)
        lines.append(f"\n### Counterexample: {record['kind']} {where}\n")
        if not record["trace"]:
            lines.append("_(violated in the initial state)_")
        for index, step in enumerate(record["trace"], start=1):
            args = ", ".join(f"{k} = {v}" for k, v in step.get("binding", {}).items())
            lines.append(f"{index}. `{step['event']}({args})`")
    return "\n".join(lines)


def _format_findings_as_table(result: Dict[str, Any]) -> str:
    findings = result.get("findings", [])
    lines = [
        "## Lint findings\n",
        f"**{'Passed' if result.get('passed') else 'Failed'}**: {len(findings)} finding(s)\n",
    ]
    if findings:
        lines.append("| Severity | Rule | Machine | Subject | Message |")
        lines.append("|----------|------|---------|---------|---------|")
        for finding in findings:
            lines.append(
                f"| {finding['severity']} | {finding['rule']} | {finding.get('machine') or '-'} | "
                f"{finding['subject']} | {finding['message']} |"
            )
    return "\n".join(lines)


def _format_models_as_table(result: Dict[str, Any]) -> str:
    lines = ["## Bundled models\n", "| Name | Resource | Machines |", "|------|----------|----------|"]
    for entry in result.get("models", []):
        lines.append(f"| {entry['name']} | {entry['uri']} | {', '.join(entry['machines'])} |")
    return "\n".join(lines)


def _format_generation(result: Dict[str, Any]) -> str:
    if not result.get("generated"):
        refused = {"all_hold": False, "reports": result.get("failing", []), "scope": result.get("scope", {})}
        refused["summary"] = {
            v: sum(1 for r in refused["reports"] if r["verdict"] == v) for v in ("holds", "violated", "scope-exhausted")
        }
        return (
            "**Generation refused**: the model is not verified at this scope. "
            "Fix the obligations below or pass `force: true`.\n\n"
            + _format_reports_as_table(refused, "Failing obligations")
        )
    manifest = result.get("manifest") or {}
    lines = [
        f"## SQL for {manifest.get('machine', '?')} ({manifest.get('dialect', '?')})\n",
        f"verified: {manifest.get('verified')}, forced: {manifest.get('forced')}, "
        f"{len(manifest.get('tables', {}))} class table(s), {len(manifest.get('procedures', {}))} procedure(s)\n",
        "```sql",
        result["sql"].rstrip("\n"),
        "```",
        "\n### Manifest\n",
        "```json",
        json.dumps(manifest, indent=2),
        "```",
    ]
    return "\n".join(lines)


def _record_tool_result(name: str, result: Dict[str, Any], request_id: str, start_time: float):
    """Helper to record tool result and metrics"""
    success = result.get("success", False)
    error = result.get("error")
    duration = time.time() - start_time
    log_tool_result(name, success, request_id, error)
    record_tool_call(name, success, duration)
    if success and "summary" in result:
        record_verdicts(result["summary"], sum(r["states"] for r in result.get("reports", [])))


def _model_args(arguments: Dict[str, Any]) -> Dict[str, Any]:
    return {"model": arguments.get("model"), "source": arguments.get("source")}


def handle_tool(
    name: str, arguments: Dict[str, Any], request_id: str, start_time: float
) -> List[Union[TextContent, ImageContent]]:
    """
    Handle tool execution. This function routes tool calls to appropriate handlers.

    Args:
        name: Tool name
        arguments: Tool arguments
        request_id: Request ID for logging
        start_time: Start time for metrics

    Returns:
        List of TextContent (and ImageContent for diagrams) responses
    """
    arguments = arguments or {}
    try:
        if name == "list_models":
            result = list_models()
            _record_tool_result(name, result, request_id, start_time)
            return [TextContent(type="text", text=_format_models_as_table(result))]

        if name == "check_model":
            result = check_model(
                **_model_args(arguments),
                scope=arguments.get("scope"),
                budget=arguments.get("budget"),
                machine=arguments.get("machine"),
            )
            _record_tool_result(name, result, request_id, start_time)
            return [TextContent(type="text", text=_format_reports_as_table(result, "Machine checks"))]

        if name == "refine_check_model":
            result = refine_check_model(
                **_model_args(arguments),
                scope=arguments.get("scope"),
                budget=arguments.get("budget"),
                machine=arguments.get("machine"),
            )
            _record_tool_result(name, result, request_id, start_time)
            title = f"Refinement checks ({', '.join(result['steps']) or 'no refinement step'})"
            return [TextContent(type="text", text=_format_reports_as_table(result, title))]

        if name == "lint_model":
            result = lint_model(**_model_args(arguments), strict=bool(arguments.get("strict", False)))
            _record_tool_result(name, result, request_id, start_time)
            return [TextContent(type="text", text=_format_findings_as_table(result))]

        if name == "generate_sql":
            result = generate_sql_script(
                **_model_args(arguments),
                dialect=arguments.get("dialect"),
                machine=arguments.get("machine"),
                scope=arguments.get("scope"),
                budget=arguments.get("budget"),
                force=bool(arguments.get("force", False)),
            )
            _record_tool_result(name, result, request_id, start_time)
            return [TextContent(type="text", text=_format_generation(result))]

        if name == "format_model":
            result = format_model(**_model_args(arguments))
            _record_tool_result(name, result, request_id, start_time)
            return [TextContent(type="text", text=f"```\n{result['text']}```")]

        if name == "render_class_diagram":
            result = class_diagram(**_model_args(arguments), machine=arguments.get("machine"))
            _record_tool_result(name, result, request_id, start_time)
            diagram = result["diagram"]
            text = (
                f"## Class diagram of {diagram['machine']}\n\n"
                f"{len(diagram['classes'])} class(es), {len(diagram['associations'])} association(s)"
            )
            if not result["success"]:
                return [TextContent(type="text", text=f"{text}\n\n{result['error']}")]
            return [
                ImageContent(type="image", data=result["image_base64"], mimeType="image/png"),
                TextContent(type="text", text=text),
            ]

        # Unknown tool
        error_msg = f"Unknown tool: {name}"
        logger.warning(f"[{request_id}] {error_msg}")
        log_tool_result(name, False, request_id, error_msg)
        record_tool_call(name, False, time.time() - start_time)
        return [TextContent(type="text", text=json.dumps({"error": error_msg}, indent=2))]

    except Exception as e:
        error_response = format_error_response(
            e, context={"tool_name": name, "arguments": sorted(arguments), "request_id": request_id}
        )
        error_response["tool"] = name
        error_response["request_id"] = request_id
        logger.error(f"[{request_id}] Tool execution failed: {e}", exc_info=True)
        log_tool_result(name, False, request_id, str(e))
        record_tool_call(name, False, time.time() - start_time)
        return [TextContent(type="text", text=json.dumps(error_response, indent=2, default=str))]
