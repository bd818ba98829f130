"""Document format, expression language and command-line tool."""

from .build import compose_document, compose_expr, simulation_setup, target_system, wired_linear
from .document import (
    Diagnostic,
    DocumentError,
    SystemDocument,
    from_json,
    parse_document,
    serialize,
    to_json,
)
from .expr import ExprError, evaluate, parse_expr, to_text

__all__ = [
    "Diagnostic",
    "DocumentError",
    "ExprError",
    "SystemDocument",
    "compose_document",
    "compose_expr",
    "evaluate",
    "from_json",
    "parse_document",
    "parse_expr",
    "serialize",
    "simulation_setup",
    "target_system",
    "to_json",
    "to_text",
    "wired_linear",
]
