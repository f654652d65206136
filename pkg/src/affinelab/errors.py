"""Exception hierarchy shared by every module.

Each error carries a short machine-readable ``code`` and an ``exit_status``
used by the command-line front end (2 = input/parameter, 3 = numerical).
"""

from __future__ import annotations


class AffineLabError(Exception):
    code = "error"
    exit_status = 3


class InputError(AffineLabError):
    code = "input_error"
    exit_status = 2


class DimensionError(InputError):
    code = "dimension_error"


class OrderError(InputError):
    code = "order_error"


class ParameterError(InputError):
    code = "parameter_error"


class ParseError(InputError):
    """Syntax error in DSL text, annotated with a 1-based line/column."""

    code = "syntax_error"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class SemanticError(ParseError):
    code = "semantic_error"


class EvaluationError(AffineLabError):
    """A function was evaluated outside its domain."""

    code = "evaluation_error"

    def __init__(self, message: str, subexpression: str | None = None):
        self.subexpression = subexpression
        if subexpression:
            message = f"{message} in '{subexpression}'"
        super().__init__(message)


class DegenerateFrameError(AffineLabError):
    code = "degenerate_frame"


class ConvexityError(AffineLabError):
    code = "not_convex"


class StructureMismatchError(AffineLabError):
    code = "structure_mismatch"
