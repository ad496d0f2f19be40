"""Row-scoped expression trees for predicates and derived values.

Three-valued null semantics throughout: a null operand makes comparisons
and arithmetic yield null, ``and``/``or`` follow Kleene logic, and
``x is null`` always yields a boolean. Predicates therefore evaluate to
true, false or null on every row, and null counts as a non-match.

Comparisons stay within one type tag except that integers widen to
floats when mixed with them; everything else is a type error, surfaced
as :class:`EvalError` with the offending row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Set

from .errors import EvalError
from .model import (
    BOOLEAN,
    DATE,
    FLOAT,
    INT64_MAX,
    INT64_MIN,
    INTEGER,
    NULL,
    TEXT,
    Table,
    tag_of,
)


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Lit(Expr):
    value: Any


@dataclass(frozen=True)
class Col(Expr):
    name: str


@dataclass(frozen=True)
class Arith(Expr):
    op: str  # + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Cmp(Expr):
    op: str  # == != < <= > >=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class IsNull(Expr):
    operand: Expr
    negated: bool = False


def _is_numeric(tag: str) -> bool:
    return tag in (INTEGER, FLOAT)


def _check_int64(value: int, row: int) -> int:
    if not (INT64_MIN <= value <= INT64_MAX):
        raise EvalError(f"integer overflow: {value}", row)
    return value


def eval_expr(expr: Expr, table: Table, row: int) -> Any:
    """Evaluate an expression against one row of a table."""
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Col):
        try:
            return table.cell(expr.name, row)
        except Exception as exc:
            raise EvalError(str(exc), row) from None
    if isinstance(expr, Neg):
        v = eval_expr(expr.operand, table, row)
        if v is None:
            return None
        tag = tag_of(v)
        if not _is_numeric(tag):
            raise EvalError(f"cannot negate {tag}", row)
        return _check_int64(-v, row) if tag == INTEGER else -v
    if isinstance(expr, Arith):
        lv = eval_expr(expr.left, table, row)
        rv = eval_expr(expr.right, table, row)
        if lv is None or rv is None:
            return None
        lt, rt = tag_of(lv), tag_of(rv)
        if lt == TEXT and rt == TEXT and expr.op == "+":
            return lv + rv
        if not (_is_numeric(lt) and _is_numeric(rt)):
            raise EvalError(f"arithmetic on {lt} and {rt}", row)
        try:
            if expr.op == "+":
                out = lv + rv
            elif expr.op == "-":
                out = lv - rv
            elif expr.op == "*":
                out = lv * rv
            elif expr.op == "/":
                out = lv / rv
            else:
                raise EvalError(f"unknown operator {expr.op!r}", row)
        except ZeroDivisionError:
            raise EvalError("division by zero", row) from None
        if isinstance(out, int):
            return _check_int64(out, row)
        return out
    if isinstance(expr, Cmp):
        lv = eval_expr(expr.left, table, row)
        rv = eval_expr(expr.right, table, row)
        if lv is None or rv is None:
            return None
        lt, rt = tag_of(lv), tag_of(rv)
        if lt != rt and not (_is_numeric(lt) and _is_numeric(rt)):
            raise EvalError(f"cannot compare {lt} with {rt}", row)
        op = expr.op
        if op == "==":
            return lv == rv
        if op == "!=":
            return lv != rv
        if op == "<":
            return lv < rv
        if op == "<=":
            return lv <= rv
        if op == ">":
            return lv > rv
        if op == ">=":
            return lv >= rv
        raise EvalError(f"unknown comparison {op!r}", row)
    if isinstance(expr, And):
        lv = _as_bool(eval_expr(expr.left, table, row), row)
        rv = _as_bool(eval_expr(expr.right, table, row), row)
        if lv is False or rv is False:
            return False
        if lv is None or rv is None:
            return None
        return True
    if isinstance(expr, Or):
        lv = _as_bool(eval_expr(expr.left, table, row), row)
        rv = _as_bool(eval_expr(expr.right, table, row), row)
        if lv is True or rv is True:
            return True
        if lv is None or rv is None:
            return None
        return False
    if isinstance(expr, Not):
        v = _as_bool(eval_expr(expr.operand, table, row), row)
        return None if v is None else not v
    if isinstance(expr, IsNull):
        v = eval_expr(expr.operand, table, row)
        return (v is not None) if expr.negated else (v is None)
    raise EvalError(f"unknown expression node {type(expr).__name__}", row)


def _as_bool(value: Any, row: int) -> Optional[bool]:
    if value is None or isinstance(value, bool):
        return value
    raise EvalError(f"expected boolean, got {tag_of(value)}", row)


def eval_predicate(expr: Expr, table: Table, row: int) -> Optional[bool]:
    """Evaluate a predicate; result is True, False or None (null)."""
    return _as_bool(eval_expr(expr, table, row), row)


def referenced_columns(expr: Expr) -> Set[str]:
    """All column names an expression reads."""
    if isinstance(expr, Col):
        return {expr.name}
    if isinstance(expr, Lit):
        return set()
    if isinstance(expr, (Neg, Not)):
        return referenced_columns(expr.operand)
    if isinstance(expr, IsNull):
        return referenced_columns(expr.operand)
    if isinstance(expr, (Arith, Cmp, And, Or)):
        return referenced_columns(expr.left) | referenced_columns(expr.right)
    return set()


# ---------------------------------------------------------------------------
# Printing (canonical source form, parseable by the pipeline language)

_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_CMP = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_ATOM = 7


def _prec(expr: Expr) -> int:
    if isinstance(expr, Or):
        return _PREC_OR
    if isinstance(expr, And):
        return _PREC_AND
    if isinstance(expr, Not):
        return _PREC_NOT
    if isinstance(expr, (Cmp, IsNull)):
        return _PREC_CMP
    if isinstance(expr, Arith):
        return _PREC_ADD if expr.op in "+-" else _PREC_MUL
    return _PREC_ATOM


def format_literal(value: Any) -> str:
    """Literal syntax for a cell value, as accepted by the parser."""
    tag = tag_of(value)
    if tag == NULL:
        return "null"
    if tag == BOOLEAN:
        return "true" if value else "false"
    if tag == TEXT:
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    if tag == DATE:
        return f'date "{value.isoformat()}"'
    if tag == FLOAT:
        return repr(value)
    return str(value)


def to_source(expr: Expr, parent_prec: int = 0) -> str:
    """Render an expression back to canonical source text."""
    prec = _prec(expr)
    if isinstance(expr, Lit):
        text = format_literal(expr.value)
    elif isinstance(expr, Col):
        text = expr.name
    elif isinstance(expr, Neg):
        text = "-" + to_source(expr.operand, _PREC_ATOM)
    elif isinstance(expr, Arith):
        text = (
            f"{to_source(expr.left, prec)} {expr.op} "
            f"{to_source(expr.right, prec + 1)}"
        )
    elif isinstance(expr, Cmp):
        text = (
            f"{to_source(expr.left, _PREC_ADD)} {expr.op} "
            f"{to_source(expr.right, _PREC_ADD)}"
        )
    elif isinstance(expr, And):
        text = f"{to_source(expr.left, prec)} and {to_source(expr.right, prec + 1)}"
    elif isinstance(expr, Or):
        text = f"{to_source(expr.left, prec)} or {to_source(expr.right, prec + 1)}"
    elif isinstance(expr, Not):
        text = f"not {to_source(expr.operand, prec)}"
    elif isinstance(expr, IsNull):
        suffix = "is not null" if expr.negated else "is null"
        text = f"{to_source(expr.operand, _PREC_ADD)} {suffix}"
    else:
        raise TypeError(f"unknown expression node {type(expr).__name__}")
    if prec < parent_prec:
        return f"({text})"
    return text
