"""
Parser for the .ubdb modelling language

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from lark.exceptions import LarkError, UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from ubdb.exceptions import ParseError
from ubdb.model import ast
from ubdb.parser.builder import ChainBuilder
from ubdb.parser.diagnostics import ERROR, ParseDiagnostic, SourceSpan
from ubdb.parser.grammar import KEYWORDS, PARSER
from ubdb.parser.printer import format_expression, format_node, format_predicate, pretty_print
from ubdb.utils.logger import get_logger

logger = get_logger()

Source = Union[str, Path, Sequence[Path]]
ParseResult = Tuple[Optional[ast.RefinementChain], List[ParseDiagnostic]]

EMPTY_INPUT = "expected 'context' or 'machine'"


def _normalise(text: str) -> str:
    if text.startswith("\ufeff"):
        text = text[1:]
    return text.replace("\r\n", "\n")


def _describe(token_value: str, token_type: str, expected: Iterable[str]) -> str:
    expected = set(expected)
    if token_value in KEYWORDS and "NAME" in expected:
        return f"'{token_value}' is a reserved keyword and cannot be used as an identifier"
    if token_type == "NAME" and "NAME" not in expected:
        if expected <= {"CONTEXT", "MACHINE", "$END"}:
            return f"{EMPTY_INPUT}, found '{token_value}'"
        return f"unknown keyword '{token_value}'"
    if expected and expected <= {"CONTEXT", "MACHINE", "$END"} and token_type != "$END":
        return f"{EMPTY_INPUT}, found '{token_value}'"
    names = ", ".join(sorted(_pretty_terminal(t) for t in expected)[:8])
    found = "end of input" if token_type == "$END" else f"'{token_value}'"
    return f"syntax error: unexpected {found}" + (f" (expected {names})" if names else "")


def _pretty_terminal(name: str) -> str:
    if name.lower() in KEYWORDS or name in KEYWORDS:
        return f"'{name.lower() if name.lower() in KEYWORDS else name}'"
    return name


def _lark_diagnostic(error: UnexpectedInput, filename: str, text: str) -> ParseDiagnostic:
    line = getattr(error, "line", None) or 1
    column = getattr(error, "column", None) or 1
    if line < 1:
        line = 1
    if column < 1:
        column = 1
    if isinstance(error, UnexpectedToken):
        token = error.token
        value = str(token)
        message = _describe(value, token.type, error.expected)
        length = len(value)
        if token.type == "$END":
            line, column, length = _end_position(text)
    elif isinstance(error, UnexpectedCharacters):
        char = text[error.pos_in_stream] if 0 <= error.pos_in_stream < len(text) else "?"
        message = f"syntax error: unexpected character {char!r}"
        length = 1
    elif isinstance(error, UnexpectedEOF):
        line, column, length = _end_position(text)
        message = "syntax error: unexpected end of input"
    else:
        message = f"syntax error: {error}"
        length = 0
    return ParseDiagnostic(SourceSpan(filename, line, column, length), ERROR, message)


def _end_position(text: str) -> Tuple[int, int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1, 0


def parse_text(text: str, filename: str = "<input>") -> ParseResult:
    """Parse one source text; never raises on malformed input"""
    text = _normalise(text)
    try:
        tree = PARSER.parse(text, start="start")
    except UnexpectedInput as error:
        return None, [_lark_diagnostic(error, filename, text)]
    except (LarkError, RecursionError) as error:
        span = SourceSpan(filename, 1, 1, 0)
        return None, [ParseDiagnostic(span, ERROR, f"syntax error: {type(error).__name__}")]

    builder = ChainBuilder(filename)
    try:
        chain = builder.transform(tree)
    except (LarkError, RecursionError) as error:
        span = SourceSpan(filename, 1, 1, 0)
        cause = getattr(error, "orig_exc", error)
        return None, [ParseDiagnostic(span, ERROR, f"could not build model: {cause}")]

    diagnostics = builder.diagnostics
    if not chain.contexts and not chain.machines:
        line, column, _ = _end_position(text)
        diagnostics.append(ParseDiagnostic(SourceSpan(filename, line, column, 0), ERROR, EMPTY_INPUT))
    if any(d.is_error for d in diagnostics):
        return None, diagnostics
    return chain, diagnostics


def _read(path: Path) -> ParseResult:
    try:
        data = path.read_bytes()
    except OSError as error:
        return None, [ParseDiagnostic(SourceSpan(str(path), 1, 1, 0), ERROR, f"cannot read file: {error.strerror or error}")]
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as error:
        prefix = data[: error.start]
        line = prefix.count(b"\n") + 1
        column = len(prefix) - (prefix.rfind(b"\n") + 1) + 1
        return None, [ParseDiagnostic(SourceSpan(str(path), line, column, 1), ERROR, "input is not valid UTF-8")]
    return parse_text(text, str(path))


def parse_files(paths: Sequence[Path], workers: int = 1) -> ParseResult:
    """
    Parse a set of files as one chain, components concatenated in path order.

    Files are parsed concurrently when workers > 1; the results are joined in
    the given order so the chain does not depend on scheduling.
    """
    paths = [Path(p) for p in paths]
    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_read, paths))
    else:
        results = [_read(p) for p in paths]

    diagnostics: List[ParseDiagnostic] = []
    contexts: List[ast.Context] = []
    machines: List[ast.Machine] = []
    for chain, file_diagnostics in results:
        diagnostics.extend(file_diagnostics)
        if chain is not None:
            contexts.extend(chain.contexts)
            machines.extend(chain.machines)
    if any(d.is_error for d in diagnostics):
        return None, diagnostics
    logger.debug(f"Parsed {len(paths)} file(s): {len(contexts)} context(s), {len(machines)} machine(s)")
    return ast.RefinementChain(tuple(contexts), tuple(machines)), diagnostics


def parse_chain(source: Source, filename: str = "<input>", workers: int = 1) -> ParseResult:
    """
    Parse DSL text or files into a refinement chain.

    Args:
        source: DSL text, a path, or a sequence of paths
        filename: name used in spans when source is text

    Returns:
        (chain, diagnostics); chain is None when any error diagnostic is present
    """
    if isinstance(source, str):
        return parse_text(source, filename)
    if isinstance(source, Path):
        return _read(source)
    return parse_files(list(source), workers=workers)


def load_chain(source: Source, filename: str = "<input>", workers: int = 1) -> ast.RefinementChain:
    """parse_chain that raises ParseError instead of returning diagnostics"""
    chain, diagnostics = parse_chain(source, filename, workers)
    if chain is None:
        first = diagnostics[0] if diagnostics else "no diagnostics"
        raise ParseError(f"Parsing failed: {first}", diagnostics=diagnostics)
    return chain


def _parse_fragment(text: str, start: str):
    try:
        tree = PARSER.parse(_normalise(text), start=start)
    except UnexpectedInput as error:
        diagnostic = _lark_diagnostic(error, "<fragment>", text)
        raise ParseError(f"Cannot parse {start} '{text}': {diagnostic.message}", diagnostics=[diagnostic])
    except LarkError as error:
        raise ParseError(f"Cannot parse {start} '{text}': {error}")
    return ChainBuilder("<fragment>").transform(tree)


def parse_expression(text: str) -> ast.Expression:
    return _parse_fragment(text, "expr")


def parse_predicate(text: str) -> ast.Predicate:
    return _parse_fragment(text, "pred")


__all__ = [
    "EMPTY_INPUT",
    "ParseDiagnostic",
    "SourceSpan",
    "format_expression",
    "format_node",
    "format_predicate",
    "load_chain",
    "parse_chain",
    "parse_expression",
    "parse_files",
    "parse_predicate",
    "parse_text",
    "pretty_print",
]
