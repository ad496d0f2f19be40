"""The `.wr` pipeline language: parse, check, print, execute.

One statement per line, `#` comments, case-insensitive keywords. Each
operation statement maps 1:1 to a provenance edge (composites expand to
a tagged group of edges), which keeps the script an auditable record of
the full data flow. Multi-target binding `(a, b) = subset t where ...`
is how one-to-many separations surface in the language.

The printer emits a canonical form; parse-print-parse is a fixpoint.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import algebra, audit, registry
from .algebra import Aggregator, BinSpec
from .engine import Session
from .errors import ExecError, ParseError, TableTideError, UnknownOperation
from .expr import (
    And,
    Arith,
    Cmp,
    Col,
    Expr,
    IsNull,
    Lit,
    Neg,
    Not,
    Or,
    format_literal,
    to_source,
)
from .model import DataType

# ---------------------------------------------------------------------------
# Tokenizer

_TWO_CHAR = ("==", "!=", "<=", ">=", "->")
_ONE_CHAR = "()[],=<>+-*/"


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, punct, newline, eof
    text: str
    value: Any
    line: int
    column: int

    def lowered(self) -> str:
        return self.text.lower()


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            tokens.append(Token("newline", "\n", None, line, col))
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source[i : i + 2] in _TWO_CHAR:
            tokens.append(Token("punct", source[i : i + 2], None, line, col))
            i += 2
            col += 2
            continue
        if ch == '"':
            start_col = col
            i += 1
            col += 1
            buf = []
            while True:
                if i >= n or source[i] == "\n":
                    raise ParseError(line, start_col, "unterminated string")
                c = source[i]
                if c == "\\":
                    if i + 1 >= n:
                        raise ParseError(line, col, "dangling escape")
                    esc = source[i + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    i += 2
                    col += 2
                    continue
                if c == '"':
                    i += 1
                    col += 1
                    break
                buf.append(c)
                i += 1
                col += 1
            text = "".join(buf)
            tokens.append(Token("string", text, text, line, start_col))
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            match = re.match(r"\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+", source[i:])
            lexeme = match.group(0)
            value: Any
            if any(c in lexeme for c in ".eE"):
                value = float(lexeme)
            else:
                value = int(lexeme)
            tokens.append(Token("number", lexeme, value, line, col))
            i += len(lexeme)
            col += len(lexeme)
            continue
        if ch.isalpha() or ch == "_":
            match = re.match(r"[A-Za-z_]\w*", source[i:])
            lexeme = match.group(0)
            tokens.append(Token("ident", lexeme, lexeme, line, col))
            i += len(lexeme)
            col += len(lexeme)
            continue
        if ch in _ONE_CHAR:
            tokens.append(Token("punct", ch, None, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(line, col, f"unexpected character {ch!r}", ch)
    tokens.append(Token("eof", "", None, line, col))
    return tokens


class _Cursor:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(tok.line, tok.column, message, tok.text)

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.lowered() in words

    def take_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            raise self.error(f"expected {word!r}")
        return self.next()

    def take_ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected {what}")
        return self.next().text

    def take_punct(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != text:
            raise self.error(f"expected {text!r}")
        return self.next()

    def at_punct(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text in texts

    def take_string(self, what: str = "string") -> str:
        tok = self.peek()
        if tok.kind != "string":
            raise self.error(f"expected {what}")
        return self.next().value

    def take_number(self) -> Any:
        neg = False
        if self.at_punct("-"):
            self.next()
            neg = True
        tok = self.peek()
        if tok.kind != "number":
            raise self.error("expected number")
        self.next()
        return -tok.value if neg else tok.value

    def skip_newlines(self) -> None:
        while self.peek().kind == "newline":
            self.next()

    def end_statement(self) -> None:
        tok = self.peek()
        if tok.kind not in ("newline", "eof"):
            raise self.error(f"unexpected {tok.text!r} at end of statement")
        if tok.kind == "newline":
            self.next()


# ---------------------------------------------------------------------------
# Expression parsing

_BOOL_WORDS = {"true": True, "false": False}


def _parse_expr(cur: _Cursor) -> Expr:
    return _parse_or(cur)


def _parse_or(cur: _Cursor) -> Expr:
    left = _parse_and(cur)
    while cur.at_keyword("or"):
        cur.next()
        left = Or(left, _parse_and(cur))
    return left


def _parse_and(cur: _Cursor) -> Expr:
    left = _parse_not(cur)
    while cur.at_keyword("and"):
        cur.next()
        left = And(left, _parse_not(cur))
    return left


def _parse_not(cur: _Cursor) -> Expr:
    if cur.at_keyword("not"):
        cur.next()
        return Not(_parse_not(cur))
    return _parse_cmp(cur)


def _parse_cmp(cur: _Cursor) -> Expr:
    left = _parse_sum(cur)
    if cur.at_punct("==", "!=", "<", "<=", ">", ">="):
        op = cur.next().text
        return Cmp(op, left, _parse_sum(cur))
    if cur.at_keyword("is"):
        cur.next()
        negated = False
        if cur.at_keyword("not"):
            cur.next()
            negated = True
        cur.take_keyword("null")
        return IsNull(left, negated)
    return left


def _parse_sum(cur: _Cursor) -> Expr:
    left = _parse_term(cur)
    while cur.at_punct("+", "-"):
        op = cur.next().text
        left = Arith(op, left, _parse_term(cur))
    return left


def _parse_term(cur: _Cursor) -> Expr:
    left = _parse_factor(cur)
    while cur.at_punct("*", "/"):
        op = cur.next().text
        left = Arith(op, left, _parse_factor(cur))
    return left


def _parse_factor(cur: _Cursor) -> Expr:
    tok = cur.peek()
    if tok.kind == "punct" and tok.text == "(":
        cur.next()
        inner = _parse_expr(cur)
        cur.take_punct(")")
        return inner
    if tok.kind == "punct" and tok.text == "-":
        cur.next()
        return Neg(_parse_factor(cur))
    if tok.kind == "number":
        cur.next()
        return Lit(tok.value)
    if tok.kind == "string":
        cur.next()
        return Lit(tok.value)
    if tok.kind == "ident":
        word = tok.lowered()
        if word in _BOOL_WORDS:
            cur.next()
            return Lit(_BOOL_WORDS[word])
        if word == "null":
            cur.next()
            return Lit(None)
        if word == "date":
            cur.next()
            text = cur.take_string("date string")
            try:
                return Lit(dt.date.fromisoformat(text))
            except ValueError:
                raise cur.error(f"bad date literal {text!r}") from None
        cur.next()
        return Col(tok.text)
    raise cur.error("expected expression")


def _parse_literal(cur: _Cursor) -> Any:
    expr = _parse_factor(cur)
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Neg) and isinstance(expr.operand, Lit):
        return -expr.operand.value
    raise cur.error("expected a literal value")


def parse_expression(text: str) -> Expr:
    """Parse a standalone predicate/expression string."""
    cur = _Cursor(tokenize(text))
    cur.skip_newlines()
    expr = _parse_expr(cur)
    cur.skip_newlines()
    if cur.peek().kind != "eof":
        raise cur.error("trailing input after expression")
    return expr


# ---------------------------------------------------------------------------
# Statements

@dataclass
class Statement:
    line: int = field(default=0, compare=False)

    def render(self) -> str:
        raise NotImplementedError


@dataclass
class LoadStmt(Statement):
    path: str = ""
    handle: str = ""

    def render(self) -> str:
        return f'load {_quote(self.path)} as {self.handle}'


@dataclass
class ExportStmt(Statement):
    handle: str = ""
    path: str = ""

    def render(self) -> str:
        return f'export {self.handle} to {_quote(self.path)}'


@dataclass
class DeleteStmt(Statement):
    handle: str = ""

    def render(self) -> str:
        return f"delete {self.handle}"


@dataclass
class AuditStmt(Statement):
    kind: str = ""  # sum, drift, key, profile
    params: dict = field(default_factory=dict)

    def render(self) -> str:
        p = self.params
        if self.kind == "sum":
            text = f'audit sum {p["left"]} vs {p["right"]} on {p["column"]}'
            if p.get("group"):
                text += f' by {p["group"]}'
            if p.get("tol") is not None:
                text += f' tol {format_literal(p["tol"])}'
            return text
        if self.kind == "drift":
            return f'audit drift {p["left"]} vs {p["right"]}'
        if self.kind == "key":
            return f'audit key {p["table"]} on [{", ".join(p["columns"])}]'
        if self.kind == "profile":
            return f'audit profile {p["table"]}'
        raise UnknownOperation(f"unknown audit kind {self.kind!r}")


@dataclass
class OpStmt(Statement):
    op: str = ""
    params: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def render(self) -> str:
        body = _RENDERERS[self.op](self.params)
        if not self.outputs:
            return body
        if len(self.outputs) == 1:
            return f"{self.outputs[0]} = {body}"
        return f'({", ".join(self.outputs)}) = {body}'


@dataclass
class Pipeline:
    statements: List[Statement]
    source: str = ""

    def render(self) -> str:
        return "".join(stmt.render() + "\n" for stmt in self.statements)


def _quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


# -- op parsing helpers ------------------------------------------------------


def _parse_name_list(cur: _Cursor) -> List[str]:
    cur.take_punct("[")
    names = [cur.take_ident("column name")]
    while cur.at_punct(","):
        cur.next()
        names.append(cur.take_ident("column name"))
    cur.take_punct("]")
    return names


def _parse_paren_names(cur: _Cursor) -> List[str]:
    cur.take_punct("(")
    names = [cur.take_ident("name")]
    while cur.at_punct(","):
        cur.next()
        names.append(cur.take_ident("name"))
    cur.take_punct(")")
    return names


def _parse_row_literal(cur: _Cursor) -> tuple:
    cur.take_punct("(")
    values = [_parse_literal(cur)]
    while cur.at_punct(","):
        cur.next()
        values.append(_parse_literal(cur))
    cur.take_punct(")")
    return tuple(values)


def _parse_dtype(cur: _Cursor) -> DataType:
    word = cur.take_ident("dtype")
    try:
        return DataType.parse(word)
    except TableTideError:
        raise cur.error(f"unknown dtype {word!r}") from None


def _parse_selector(cur: _Cursor):
    if cur.at_keyword("where"):
        cur.next()
        return _parse_expr(cur)
    if cur.at_keyword("at"):
        cur.next()
        cur.take_punct("[")
        indices = [cur.take_number()]
        while cur.at_punct(","):
            cur.next()
            indices.append(cur.take_number())
        cur.take_punct("]")
        return [int(i) for i in indices]
    raise cur.error("expected 'where <predicate>' or 'at [indices]'")


def _render_selector(selector) -> str:
    if isinstance(selector, Expr):
        return f"where {to_source(selector)}"
    return f'at [{", ".join(str(i) for i in selector)}]'


def _parse_aggs(cur: _Cursor) -> List[Tuple[Aggregator, str]]:
    aggs = []
    while True:
        fn = cur.take_ident("aggregate function").lower()
        if fn not in algebra.AGG_FUNCTIONS:
            raise cur.error(f"unknown aggregate {fn!r}")
        target = None
        if fn != "count":
            cur.take_punct("(")
            target = cur.take_ident("target column")
            cur.take_punct(")")
        cur.take_keyword("as")
        out = cur.take_ident("output name")
        aggs.append((Aggregator(fn, target), out))
        if cur.at_punct(","):
            cur.next()
            continue
        return aggs


def _render_aggs(aggs) -> str:
    parts = []
    for agg, out in aggs:
        if agg.function == "count":
            parts.append(f"count as {out}")
        else:
            parts.append(f"{agg.function}({agg.target}) as {out}")
    return ", ".join(parts)


def _parse_gen_map(cur: _Cursor) -> Dict[str, Expr]:
    cur.take_punct("(")
    edits: Dict[str, Expr] = {}
    while True:
        name = cur.take_ident("column name")
        cur.take_keyword("from")
        edits[name] = _parse_expr(cur)
        if cur.at_punct(","):
            cur.next()
            continue
        cur.take_punct(")")
        return edits


def _render_gen_map(edits: Dict[str, Expr]) -> str:
    inner = ", ".join(f"{name} from {to_source(gen)}" for name, gen in edits.items())
    return f"({inner})"


# -- per-operation parsers (cursor positioned after the op name) -------------


def _p_create(cur):
    cur.take_punct("(")
    schema = []
    while True:
        name = cur.take_ident("column name")
        schema.append((name, _parse_dtype(cur)))
        if cur.at_punct(","):
            cur.next()
            continue
        cur.take_punct(")")
        break
    rows = []
    if cur.at_keyword("rows"):
        cur.next()
        rows.append(_parse_row_literal(cur))
        while cur.at_punct(","):
            cur.next()
            rows.append(_parse_row_literal(cur))
    return {"schema": schema, "rows": rows}


def _r_create(p):
    cols = ", ".join(f"{name} {dtype.short().rstrip('?')}" for name, dtype in p["schema"])
    text = f"create ({cols})"
    if p.get("rows"):
        rows = ", ".join(
            "(" + ", ".join(format_literal(v) for v in row) + ")" for row in p["rows"]
        )
        text += f" rows {rows}"
    return text


def _p_create_column(cur):
    table = cur.take_ident("table handle")
    name = cur.take_ident("column name")
    dtype = _parse_dtype(cur)
    cur.take_keyword("from")
    return {"table": table, "name": name, "dtype": dtype, "generator": _parse_expr(cur)}


def _r_create_column(p):
    return (
        f'create_column {p["table"]} {p["name"]} {p["dtype"].short().rstrip("?")} '
        f'from {to_source(p["generator"])}'
    )


def _p_create_row(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("values")
    return {"table": table, "values": _parse_row_literal(cur)}


def _r_create_row(p):
    inner = ", ".join(format_literal(v) for v in p["values"])
    return f'create_row {p["table"]} values ({inner})'


def _p_delete_column(cur):
    return {"table": cur.take_ident("table handle"), "column": cur.take_ident("column")}


def _r_delete_column(p):
    return f'delete_column {p["table"]} {p["column"]}'


def _p_delete_row(cur):
    table = cur.take_ident("table handle")
    return {"table": table, "selector": _parse_selector(cur)}


def _r_delete_row(p):
    return f'delete_row {p["table"]} {_render_selector(p["selector"])}'


def _p_rearrange(cur):
    table = cur.take_ident("table handle")
    params: dict = {"table": table}
    if cur.at_keyword("sort"):
        cur.next()
        cur.take_punct("(")
        keys = []
        while True:
            name = cur.take_ident("column")
            if cur.at_keyword("asc", "desc"):
                direction = cur.next().lowered()
            else:
                raise cur.error("expected asc or desc")
            keys.append((name, direction))
            if cur.at_punct(","):
                cur.next()
                continue
            cur.take_punct(")")
            break
        params["sort_keys"] = keys
    if cur.at_keyword("cols"):
        cur.next()
        params["column_order"] = _parse_name_list(cur)
    return params


def _r_rearrange(p):
    text = f'rearrange {p["table"]}'
    if p.get("sort_keys"):
        inner = ", ".join(f"{name} {direction}" for name, direction in p["sort_keys"])
        text += f" sort ({inner})"
    if p.get("column_order"):
        text += f' cols [{", ".join(p["column_order"])}]'
    return text


def _p_fold(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("cols")
    value_columns = _parse_name_list(cur)
    cur.take_keyword("into")
    names = _parse_paren_names(cur)
    if len(names) != 2:
        raise cur.error("fold takes exactly (key, value) names")
    return {
        "table": table,
        "value_columns": value_columns,
        "key_name": names[0],
        "value_name": names[1],
    }


def _r_fold(p):
    return (
        f'fold {p["table"]} cols [{", ".join(p["value_columns"])}] '
        f'into ({p["key_name"]}, {p["value_name"]})'
    )


def _p_unfold(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("key")
    key = cur.take_ident("key column")
    cur.take_keyword("value")
    value = cur.take_ident("value column")
    return {"table": table, "key_column": key, "value_column": value}


def _r_unfold(p):
    return f'unfold {p["table"]} key {p["key_column"]} value {p["value_column"]}'


def _p_transform_column(cur):
    table = cur.take_ident("table handle")
    column = cur.take_ident("column")
    if cur.at_keyword("from"):
        cur.next()
        return {"table": table, "column": column, "mapping": _parse_expr(cur)}
    if cur.at_keyword("lookup"):
        cur.next()
        cur.take_punct("(")
        mapping = {}
        while True:
            old = _parse_literal(cur)
            cur.take_punct("->")
            mapping[old] = _parse_literal(cur)
            if cur.at_punct(","):
                cur.next()
                continue
            cur.take_punct(")")
            break
        return {"table": table, "column": column, "mapping": mapping}
    raise cur.error("expected 'from <expr>' or 'lookup (...)'")


def _r_transform_column(p):
    mapping = p["mapping"]
    if isinstance(mapping, Expr):
        return f'transform_column {p["table"]} {p["column"]} from {to_source(mapping)}'
    inner = ", ".join(
        f"{format_literal(old)} -> {format_literal(new)}" for old, new in mapping.items()
    )
    return f'transform_column {p["table"]} {p["column"]} lookup ({inner})'


def _p_transform_row(cur):
    table = cur.take_ident("table handle")
    selector = _parse_selector(cur)
    cur.take_keyword("set")
    cur.take_punct("(")
    edits = {}
    while True:
        name = cur.take_ident("column")
        cur.take_punct("=")
        edits[name] = _parse_literal(cur)
        if cur.at_punct(","):
            cur.next()
            continue
        cur.take_punct(")")
        break
    return {"table": table, "selector": selector, "edits": edits}


def _r_transform_row(p):
    inner = ", ".join(
        f"{name} = {format_literal(value)}" for name, value in p["edits"].items()
    )
    return f'transform_row {p["table"]} {_render_selector(p["selector"])} set ({inner})'


def _p_subset(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("where")
    return {"table": table, "predicate": _parse_expr(cur)}


def _r_subset(p):
    return f'subset {p["table"]} where {to_source(p["predicate"])}'


def _p_decompose(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("by")
    column = cur.take_ident("column")
    params: dict = {"table": table, "column": column}
    if cur.at_keyword("bins"):
        cur.next()
        k = cur.take_number()
        low = high = None
        if cur.at_keyword("from"):
            cur.next()
            low = cur.take_number()
            cur.take_keyword("to")
            high = cur.take_number()
        params["bins"] = BinSpec(int(k), low, high)
    return params


def _r_decompose(p):
    text = f'decompose {p["table"]} by {p["column"]}'
    bins = p.get("bins")
    if bins is not None:
        text += f" bins {bins.k}"
        if bins.low is not None and bins.high is not None:
            text += f" from {format_literal(bins.low)} to {format_literal(bins.high)}"
    return text


def _p_split(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("key")
    key = cur.take_ident("key column")
    cur.take_keyword("cols")
    return {"table": table, "key": key, "right_columns": _parse_name_list(cur)}


def _r_split(p):
    return f'split {p["table"]} key {p["key"]} cols [{", ".join(p["right_columns"])}]'


def _p_separate_column(cur):
    table = cur.take_ident("table handle")
    column = cur.take_ident("column")
    if cur.at_keyword("on"):
        cur.next()
        splitter: Any = cur.take_string("delimiter")
    elif cur.at_keyword("at"):
        cur.next()
        cur.take_punct("(")
        positions = [int(cur.take_number())]
        while cur.at_punct(","):
            cur.next()
            positions.append(int(cur.take_number()))
        cur.take_punct(")")
        splitter = positions
    else:
        raise cur.error("expected 'on <delimiter>' or 'at (positions)'")
    cur.take_keyword("into")
    names = _parse_paren_names(cur)
    return {"table": table, "column": column, "splitter": splitter, "new_names": names}


def _r_separate_column(p):
    splitter = p["splitter"]
    if isinstance(splitter, str):
        how = f"on {_quote(splitter)}"
    else:
        how = f'at ({", ".join(str(i) for i in splitter)})'
    return (
        f'separate_column {p["table"]} {p["column"]} {how} '
        f'into ({", ".join(p["new_names"])})'
    )


def _p_separate_row(cur):
    table = cur.take_ident("table handle")
    column = cur.take_ident("column")
    cur.take_keyword("on")
    return {"table": table, "column": column, "delimiter": cur.take_string("delimiter")}


def _r_separate_row(p):
    return f'separate_row {p["table"]} {p["column"]} on {_quote(p["delimiter"])}'


def _p_extend(cur):
    tables = [cur.take_ident("table handle")]
    while cur.at_punct(","):
        cur.next()
        tables.append(cur.take_ident("table handle"))
    params: dict = {"tables": tables}
    if cur.at_keyword("policy"):
        cur.next()
        word = cur.take_ident("policy").lower()
        if word not in ("strict", "union"):
            raise cur.error(f"unknown policy {word!r}")
        params["policy"] = word
    return params


def _r_extend(p):
    text = f'extend {", ".join(p["tables"])}'
    if p.get("policy", "strict") != "strict":
        text += f' policy {p["policy"]}'
    return text


def _p_supplement(cur):
    left = cur.take_ident("left table")
    cur.take_keyword("with")
    right = cur.take_ident("right table")
    cur.take_keyword("on")
    return {"left": left, "right": right, "key": cur.take_ident("key column")}


def _r_supplement(p):
    return f'supplement {p["left"]} with {p["right"]} on {p["key"]}'


def _p_match(cur):
    left = cur.take_ident("left table")
    cur.take_keyword("with")
    right = cur.take_ident("right table")
    cur.take_keyword("on")
    key = cur.take_ident("key column")
    params = {"left": left, "right": right, "key": key}
    if cur.at_keyword("mode"):
        cur.next()
        word = cur.take_ident("mode").lower()
        if word not in ("inner", "semi", "anti"):
            raise cur.error(f"unknown mode {word!r}")
        params["mode"] = word
    return params


def _r_match(p):
    text = f'match {p["left"]} with {p["right"]} on {p["key"]}'
    if p.get("mode", "inner") != "inner":
        text += f' mode {p["mode"]}'
    return text


def _p_combine_columns(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("cols")
    columns = _parse_name_list(cur)
    if cur.at_keyword("sep"):
        cur.next()
        combiner: Any = cur.take_string("separator")
    elif cur.at_keyword("from"):
        cur.next()
        combiner = _parse_expr(cur)
    else:
        raise cur.error("expected 'sep <string>' or 'from <expr>'")
    cur.take_keyword("as")
    return {
        "table": table,
        "columns": columns,
        "combiner": combiner,
        "new_name": cur.take_ident("new column name"),
    }


def _r_combine_columns(p):
    combiner = p["combiner"]
    how = f"from {to_source(combiner)}" if isinstance(combiner, Expr) else f"sep {_quote(combiner)}"
    return (
        f'combine_columns {p["table"]} cols [{", ".join(p["columns"])}] '
        f'{how} as {p["new_name"]}'
    )


def _p_summarize(cur):
    table = cur.take_ident("table handle")
    group_columns: List[str] = []
    if cur.at_keyword("by"):
        cur.next()
        group_columns.append(cur.take_ident("group column"))
        while cur.at_punct(","):
            cur.next()
            group_columns.append(cur.take_ident("group column"))
    cur.take_keyword("agg")
    return {"table": table, "group_columns": group_columns, "aggs": _parse_aggs(cur)}


def _r_summarize(p):
    text = f'summarize {p["table"]}'
    if p.get("group_columns"):
        text += f' by {", ".join(p["group_columns"])}'
    return text + f' agg {_render_aggs(p["aggs"])}'


def _p_interpolate(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("target")
    target = cur.take_ident("target column")
    cur.take_keyword("method")
    method = cur.take_ident("method").lower()
    if method not in ("linear", "forward_fill", "group_mean"):
        raise cur.error(f"unknown method {method!r}")
    params: dict = {"table": table, "target": target, "method": method}
    if cur.at_keyword("order"):
        cur.next()
        params["order"] = cur.take_ident("order column")
    if cur.at_keyword("by"):
        cur.next()
        groups = [cur.take_ident("group column")]
        while cur.at_punct(","):
            cur.next()
            groups.append(cur.take_ident("group column"))
        params["group_columns"] = groups
    return params


def _r_interpolate(p):
    text = f'interpolate {p["table"]} target {p["target"]} method {p["method"]}'
    if p.get("order"):
        text += f' order {p["order"]}'
    if p.get("group_columns"):
        text += f' by {", ".join(p["group_columns"])}'
    return text


def _p_filter(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("where")
    return {"table": table, "predicate": _parse_expr(cur)}


def _r_filter(p):
    return f'filter {p["table"]} where {to_source(p["predicate"])}'


def _p_group_aggregate(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("by")
    group = cur.take_ident("group column")
    cur.take_keyword("agg")
    return {"table": table, "group": group, "aggs": _parse_aggs(cur)}


def _r_group_aggregate(p):
    return f'group_aggregate {p["table"]} by {p["group"]} agg {_render_aggs(p["aggs"])}'


def _p_lookup_transform(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("with")
    lookup = cur.take_ident("lookup table")
    cur.take_keyword("on")
    key = cur.take_ident("key column")
    cur.take_keyword("value")
    return {
        "table": table,
        "lookup": lookup,
        "key": key,
        "value_column": cur.take_ident("value column"),
    }


def _r_lookup_transform(p):
    return (
        f'lookup_transform {p["table"]} with {p["lookup"]} '
        f'on {p["key"]} value {p["value_column"]}'
    )


def _p_divide_and_conquer(cur):
    table = cur.take_ident("table handle")
    cur.take_keyword("facet")
    facet = _parse_expr(cur)
    cur.take_keyword("edits")
    edits = _parse_gen_map(cur)
    cur.take_keyword("key")
    return {
        "table": table,
        "facet": facet,
        "edits": edits,
        "key": cur.take_ident("key column"),
    }


def _r_divide_and_conquer(p):
    return (
        f'divide_and_conquer {p["table"]} facet {to_source(p["facet"])} '
        f'edits {_render_gen_map(p["edits"])} key {p["key"]}'
    )


def _p_split_compute_merge(cur):
    table = cur.take_ident("table handle")
    column = cur.take_ident("column")
    cur.take_keyword("on")
    delimiter = cur.take_string("delimiter")
    cur.take_keyword("into")
    names = _parse_paren_names(cur)
    cur.take_keyword("edits")
    edits = _parse_gen_map(cur)
    params: dict = {
        "table": table,
        "column": column,
        "delimiter": delimiter,
        "new_names": names,
        "edits": edits,
    }
    if cur.at_keyword("sep"):
        cur.next()
        params["sep"] = cur.take_string("separator")
    return params


def _r_split_compute_merge(p):
    text = (
        f'split_compute_merge {p["table"]} {p["column"]} on {_quote(p["delimiter"])} '
        f'into ({", ".join(p["new_names"])}) edits {_render_gen_map(p["edits"])}'
    )
    if p.get("sep") is not None:
        text += f' sep {_quote(p["sep"])}'
    return text


_PARSERS: Dict[str, Callable[[_Cursor], dict]] = {
    "create": _p_create,
    "create_column": _p_create_column,
    "create_row": _p_create_row,
    "delete_column": _p_delete_column,
    "delete_row": _p_delete_row,
    "rearrange": _p_rearrange,
    "fold": _p_fold,
    "unfold": _p_unfold,
    "transform_column": _p_transform_column,
    "transform_row": _p_transform_row,
    "subset": _p_subset,
    "decompose": _p_decompose,
    "split": _p_split,
    "separate_column": _p_separate_column,
    "separate_row": _p_separate_row,
    "extend": _p_extend,
    "supplement": _p_supplement,
    "match": _p_match,
    "combine_columns": _p_combine_columns,
    "summarize": _p_summarize,
    "interpolate": _p_interpolate,
    "filter": _p_filter,
    "group_aggregate": _p_group_aggregate,
    "lookup_transform": _p_lookup_transform,
    "divide_and_conquer": _p_divide_and_conquer,
    "split_compute_merge": _p_split_compute_merge,
}

_RENDERERS: Dict[str, Callable[[dict], str]] = {
    "create": _r_create,
    "create_column": _r_create_column,
    "create_row": _r_create_row,
    "delete_column": _r_delete_column,
    "delete_row": _r_delete_row,
    "rearrange": _r_rearrange,
    "fold": _r_fold,
    "unfold": _r_unfold,
    "transform_column": _r_transform_column,
    "transform_row": _r_transform_row,
    "subset": _r_subset,
    "decompose": _r_decompose,
    "split": _r_split,
    "separate_column": _r_separate_column,
    "separate_row": _r_separate_row,
    "extend": _r_extend,
    "supplement": _r_supplement,
    "match": _r_match,
    "combine_columns": _r_combine_columns,
    "summarize": _r_summarize,
    "interpolate": _r_interpolate,
    "filter": _r_filter,
    "group_aggregate": _r_group_aggregate,
    "lookup_transform": _r_lookup_transform,
    "divide_and_conquer": _r_divide_and_conquer,
    "split_compute_merge": _r_split_compute_merge,
}


def _parse_audit(cur: _Cursor, line: int) -> AuditStmt:
    kind = cur.take_ident("audit kind").lower()
    if kind == "sum":
        left = cur.take_ident("table")
        cur.take_keyword("vs")
        right = cur.take_ident("table")
        cur.take_keyword("on")
        column = cur.take_ident("column")
        params: dict = {"left": left, "right": right, "column": column}
        if cur.at_keyword("by"):
            cur.next()
            params["group"] = cur.take_ident("group column")
        if cur.at_keyword("tol"):
            cur.next()
            params["tol"] = float(cur.take_number())
        return AuditStmt(line=line, kind="sum", params=params)
    if kind == "drift":
        left = cur.take_ident("table")
        cur.take_keyword("vs")
        right = cur.take_ident("table")
        return AuditStmt(line=line, kind="drift", params={"left": left, "right": right})
    if kind == "key":
        table = cur.take_ident("table")
        cur.take_keyword("on")
        columns = _parse_name_list(cur)
        return AuditStmt(line=line, kind="key", params={"table": table, "columns": columns})
    if kind == "profile":
        return AuditStmt(line=line, kind="profile", params={"table": cur.take_ident("table")})
    raise cur.error(f"unknown audit kind {kind!r}")


def parse(source: str) -> Pipeline:
    """Parse pipeline source text into statements."""
    cur = _Cursor(tokenize(source))
    statements: List[Statement] = []
    while True:
        cur.skip_newlines()
        tok = cur.peek()
        if tok.kind == "eof":
            break
        line = tok.line
        if tok.kind != "ident" and not (tok.kind == "punct" and tok.text == "("):
            raise cur.error("expected a statement")
        word = tok.lowered() if tok.kind == "ident" else ""
        if word == "load":
            cur.next()
            path = cur.take_string("file path or URL")
            cur.take_keyword("as")
            handle = cur.take_ident("handle")
            statements.append(LoadStmt(line=line, path=path, handle=handle))
        elif word == "export":
            cur.next()
            handle = cur.take_ident("handle")
            cur.take_keyword("to")
            statements.append(
                ExportStmt(line=line, handle=handle, path=cur.take_string("file path"))
            )
        elif word == "delete":
            cur.next()
            statements.append(DeleteStmt(line=line, handle=cur.take_ident("handle")))
        elif word == "audit":
            cur.next()
            statements.append(_parse_audit(cur, line))
        else:
            # assignment: target '=' opcall
            if tok.kind == "punct":
                targets = _parse_paren_names(cur)
            else:
                targets = [cur.take_ident("target handle")]
            cur.take_punct("=")
            op_tok = cur.peek()
            op = cur.take_ident("operation name").lower()
            if op not in _PARSERS:
                raise ParseError(
                    op_tok.line, op_tok.column, f"unknown operation {op!r}", op_tok.text
                )
            params = _PARSERS[op](cur)
            statements.append(OpStmt(line=line, op=op, params=params, outputs=targets))
        cur.end_statement()
    return Pipeline(statements, source)


# ---------------------------------------------------------------------------
# Static checking

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Issue:
    severity: str
    line: int
    message: str


def check(pipeline: Pipeline, prebound: Sequence[str] = ()) -> List[Issue]:
    """Static checks: unbound handles, rebinds, dead tables, arities.

    ``prebound`` names handles that already exist (a session's tables);
    they are exempt from the unused-table warning.
    """
    issues: List[Issue] = []
    bound: dict = {}  # handle -> line bound
    wildcard: dict = {}  # decompose prefixes -> line
    consumed: set = set(prebound)
    for handle in prebound:
        bound[handle] = 0

    def is_bound(handle: str) -> bool:
        if handle in bound:
            return True
        for prefix in wildcard:
            if handle.startswith(prefix + "_"):
                consumed.add(prefix)
                return True
        return False

    def use(handle: str, line: int) -> None:
        if is_bound(handle):
            consumed.add(handle)
        else:
            issues.append(Issue(ERROR, line, f"handle {handle!r} is not bound"))

    def bind(handle: str, line: int) -> None:
        if handle in bound or any(
            handle.startswith(p + "_") for p in wildcard
        ):
            issues.append(
                Issue(WARNING, line, f"handle {handle!r} rebinds an earlier table")
            )
        bound[handle] = line

    for stmt in pipeline.statements:
        if isinstance(stmt, LoadStmt):
            bind(stmt.handle, stmt.line)
        elif isinstance(stmt, ExportStmt):
            use(stmt.handle, stmt.line)
        elif isinstance(stmt, DeleteStmt):
            use(stmt.handle, stmt.line)
            bound.pop(stmt.handle, None)
        elif isinstance(stmt, AuditStmt):
            for key in ("left", "right", "table"):
                if key in stmt.params:
                    use(stmt.params[key], stmt.line)
        elif isinstance(stmt, OpStmt):
            spec = registry.get(stmt.op)
            for p in spec.params:
                if p.name not in stmt.params:
                    continue
                if p.kind == "handle":
                    use(stmt.params[p.name], stmt.line)
                elif p.kind == "handles":
                    for handle in stmt.params[p.name]:
                        use(handle, stmt.line)
            expected = 1 if spec.composite else spec.outputs
            if expected == -1:
                if len(stmt.outputs) != 1:
                    issues.append(
                        Issue(
                            ERROR,
                            stmt.line,
                            f"{stmt.op} takes one output prefix, got {len(stmt.outputs)}",
                        )
                    )
                else:
                    wildcard[stmt.outputs[0]] = stmt.line
            else:
                if len(stmt.outputs) != expected:
                    issues.append(
                        Issue(
                            ERROR,
                            stmt.line,
                            f"{stmt.op} binds {expected} tables, got {len(stmt.outputs)}",
                        )
                    )
                for handle in stmt.outputs:
                    bind(handle, stmt.line)
    for handle, line in {**bound, **wildcard}.items():
        if handle not in consumed:
            issues.append(
                Issue(WARNING, line, f"table {handle!r} is never used or exported")
            )
    return issues


def has_errors(issues: Sequence[Issue]) -> bool:
    return any(issue.severity == ERROR for issue in issues)


# ---------------------------------------------------------------------------
# Execution

@dataclass
class StatementOutcome:
    index: int
    line: int
    text: str
    status: str  # ok, error, pass, finding
    detail: str = ""
    diagnostics: list = field(default_factory=list)


@dataclass
class ExecutionReport:
    outcomes: List[StatementOutcome]
    error: Optional[ExecError] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def execute(
    pipeline: Pipeline,
    session: Session,
    base_dir: Optional[str] = None,
) -> ExecutionReport:
    """Run a pipeline in a session, recording provenance per statement.

    A failure at statement k leaves the session exactly as the first k-1
    statements built it and reports an :class:`ExecError` naming k.
    """
    from . import io as tio
    from pathlib import Path

    base = Path(base_dir) if base_dir else Path.cwd()

    def resolve(path: str) -> str:
        if re.match(r"^https?://", path):
            return path
        p = Path(path)
        return str(p if p.is_absolute() else base / p)

    outcomes: List[StatementOutcome] = []
    for index, stmt in enumerate(pipeline.statements):
        try:
            if isinstance(stmt, LoadStmt):
                table, op_name = tio.load_table(resolve(stmt.path))
                session.add_table(table, stmt.handle, op=op_name, params={"path": stmt.path})
                detail = _table_summary(session, stmt.handle)
                outcomes.append(
                    StatementOutcome(index, stmt.line, stmt.render(), "ok", detail)
                )
            elif isinstance(stmt, ExportStmt):
                table = session.table(stmt.handle)
                tio.save_table(table, resolve(stmt.path))
                session.mark_sink(stmt.handle)
                outcomes.append(
                    StatementOutcome(index, stmt.line, stmt.render(), "ok", stmt.path)
                )
            elif isinstance(stmt, DeleteStmt):
                session.delete(stmt.handle)
                outcomes.append(
                    StatementOutcome(index, stmt.line, stmt.render(), "ok")
                )
            elif isinstance(stmt, AuditStmt):
                diagnostic = _run_audit(session, stmt)
                if diagnostic is None:
                    outcomes.append(
                        StatementOutcome(index, stmt.line, stmt.render(), "pass")
                    )
                else:
                    outcomes.append(
                        StatementOutcome(
                            index, stmt.line, stmt.render(), "finding",
                            diagnostic.kind, [diagnostic.id],
                        )
                    )
            elif isinstance(stmt, OpStmt):
                outcome = session.apply(stmt.op, stmt.params, stmt.outputs)
                detail = "; ".join(
                    _table_summary(session, handle) for handle in outcome.handles
                )
                outcomes.append(
                    StatementOutcome(
                        index, stmt.line, stmt.render(), "ok", detail,
                        [d.id for d in outcome.diagnostics],
                    )
                )
            else:
                raise UnknownOperation(f"unknown statement {type(stmt).__name__}")
        except TableTideError as exc:
            error = exc if isinstance(exc, ExecError) else ExecError(index, stmt.line, exc)
            outcomes.append(
                StatementOutcome(index, stmt.line, stmt.render(), "error", str(exc))
            )
            return ExecutionReport(outcomes, error)
    return ExecutionReport(outcomes)


def _table_summary(session: Session, handle: str) -> str:
    table = session.table(handle)
    return f"{handle}: {table.row_count}x{table.width}"


def _run_audit(session: Session, stmt: AuditStmt):
    p = stmt.params
    if stmt.kind == "sum":
        left = session.table(p["left"])
        right = session.table(p["right"])
        if p.get("group"):
            diagnostic = audit.test_equality_grouped(
                left, right, p["group"], p["column"], p.get("tol")
            )
        else:
            diagnostic = audit.test_equality_total(left, right, p["column"], p.get("tol"))
    elif stmt.kind == "drift":
        diagnostic = audit.detect_schema_drift(
            session.table(p["left"]), session.table(p["right"])
        )
    elif stmt.kind == "key":
        diagnostic = audit.check_key_uniqueness(session.table(p["table"]), p["columns"])
    elif stmt.kind == "profile":
        report = audit.profile_summary(session.table(p["table"]))
        session.profile_reports = getattr(session, "profile_reports", [])
        session.profile_reports.append((p["table"], report))
        return None
    else:
        raise UnknownOperation(f"unknown audit kind {stmt.kind!r}")
    return session.record_audit(diagnostic)
