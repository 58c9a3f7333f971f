"""DML front end: lexer, parser, canonical printer, statement keys.

The statement language is a small SQL subset: CREATE/DROP TABLE, LOAD,
INSERT, SELECT (scan/filter/project of one table), UPDATE, DELETE, and
COMPACT, plus a WITH clause carrying planner hints (RATIO, K, PLAN).

Parsing is total: any input produces either a Statement or a ParseError
carrying 1-based line:col and the tokens that would have been accepted;
nothing the lexer or parser does may raise anything else. Keywords are
case-insensitive and identifiers fold to lowercase. RATIO, K, PLAN, EDIT,
OVERWRITE and the type names are contextual, so they stay usable as
column names.

Beyond the core grammar the parser accepts parenthesized predicates, a
unary minus on numeric literals, TRUE/FALSE/NULL literals, and ``--``
line comments. ``to_text`` renders a canonical form whose reparse is
value-identical, and printing that reparse reproduces the same text.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

from .errors import ParseError

# -- tokens -------------------------------------------------------------------

IDENT = "identifier"
NUMBER = "number"
STRING = "string"
KW = "keyword"
OP = "operator"
EOF = "end of input"

KEYWORDS = frozenset({
    "CREATE", "TABLE", "DROP", "LOAD", "FROM", "INSERT", "INTO", "VALUES",
    "SELECT", "UPDATE", "SET", "DELETE", "WHERE", "WITH", "COMPACT",
    "AND", "OR", "TRUE", "FALSE", "NULL",
})

_TWO_CHAR_OPS = ("!=", "<=", ">=")
_ONE_CHAR_OPS = "()=<>,;+-*/"

_MAX_NESTING = 64


class Token(NamedTuple):
    type: str
    value: object
    line: int
    col: int

    def describe(self) -> str:
        if self.type == KW:
            return str(self.value)
        if self.type == OP:
            return f"'{self.value}'"
        if self.type == EOF:
            return EOF
        if self.type == IDENT:
            return f"identifier {self.value!r}"
        return f"{self.type} {self.value!r}"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)

    def advance(ch: str) -> None:
        nonlocal line, col
        if ch == "\n":
            line += 1
            col = 1
        else:
            col += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(ch)
            i += 1
            continue
        if ch == "-" and text[i:i + 2] == "--":
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token(KW, upper, start_line, start_col))
            else:
                tokens.append(Token(IDENT, word.lower(), start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit() or (ch == "." and text[i + 1:i + 2].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lexeme = text[i:j]
            if is_float:
                value = float(lexeme)
                if not math.isfinite(value):
                    raise ParseError(f"numeric literal {lexeme!r} out of range",
                                     start_line, start_col)
            else:
                value = int(lexeme)
            tokens.append(Token(NUMBER, value, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch == "'":
            i += 1
            col += 1
            parts: list[str] = []
            while True:
                if i >= n:
                    raise ParseError("unterminated string literal",
                                     start_line, start_col)
                c = text[i]
                if c == "'":
                    if text[i + 1:i + 2] == "'":
                        parts.append("'")
                        i += 2
                        col += 2
                        continue
                    i += 1
                    col += 1
                    break
                parts.append(c)
                advance(c)
                i += 1
            tokens.append(Token(STRING, "".join(parts), start_line, start_col))
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(OP, two, start_line, start_col))
            i += 2
            col += 2
            continue
        if ch == "!":
            raise ParseError("expected '=' after '!'", start_line, start_col,
                             expected=("'!='",))
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(OP, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(Token(EOF, None, line, col))
    return tokens


# -- AST ------------------------------------------------------------------------

_POS = dict(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Literal:
    value: object  # int | float | str | bool | None
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class ColumnRef:
    name: str
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / = != < <= > >= AND OR
    left: "Expr"
    right: "Expr"
    pos: Optional[tuple[int, int]] = field(**_POS)


Expr = Union[Literal, ColumnRef, BinOp]


@dataclass(frozen=True)
class Options:
    """Planner hints from a WITH clause; absent fields mean engine defaults."""
    ratio: Optional[float] = None
    k: Optional[int] = None
    plan: Optional[str] = None  # "edit" | "overwrite"

    def is_empty(self) -> bool:
        return self.ratio is None and self.k is None and self.plan is None


@dataclass(frozen=True)
class CreateTable:
    table: str
    columns: tuple[tuple[str, str], ...]  # (name, canonical type name)
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class DropTable:
    table: str
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class Load:
    table: str
    path: str
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class Insert:
    table: str
    rows: tuple[tuple[Expr, ...], ...]
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class Select:
    table: str
    columns: Optional[tuple[str, ...]]  # None means '*'
    where: Optional[Expr] = None
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class Update:
    table: str
    assignments: tuple[tuple[str, Expr], ...]
    where: Optional[Expr] = None
    options: Options = Options()
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class Delete:
    table: str
    where: Optional[Expr] = None
    options: Options = Options()
    pos: Optional[tuple[int, int]] = field(**_POS)


@dataclass(frozen=True)
class Compact:
    table: str
    pos: Optional[tuple[int, int]] = field(**_POS)


Statement = Union[CreateTable, DropTable, Load, Insert, Select, Update,
                  Delete, Compact]

_TYPE_NAMES = ("int64", "float64", "string", "bool")
_TYPE_CANON = {
    "int64": "int64", "int": "int64",
    "float64": "float64", "float": "float64", "double": "float64",
    "string": "string", "str": "string", "text": "string",
    "bool": "bool", "boolean": "bool",
}


# -- parser ---------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    # helpers

    def peek(self) -> Token:
        return self.tokens[self.i]

    def take(self) -> Token:
        tok = self.tokens[self.i]
        if tok.type != EOF:
            self.i += 1
        return tok

    def fail(self, expected: tuple[str, ...]) -> "ParseError":
        tok = self.peek()
        options = ", ".join(expected)
        return ParseError(f"expected {options}, got {tok.describe()}",
                          tok.line, tok.col, expected=expected)

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if tok.type == KW and tok.value == word:
            return self.take()
        raise self.fail((word,))

    def expect_op(self, symbol: str) -> Token:
        tok = self.peek()
        if tok.type == OP and tok.value == symbol:
            return self.take()
        raise self.fail((f"'{symbol}'",))

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.type == IDENT:
            return self.take()
        raise self.fail((what,))

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.type == KW and tok.value == word

    def at_op(self, symbol: str) -> bool:
        tok = self.peek()
        return tok.type == OP and tok.value == symbol

    def at_ident(self, word: str) -> bool:
        tok = self.peek()
        return tok.type == IDENT and tok.value == word

    # statements

    _HEADS = ("CREATE", "DROP", "LOAD", "INSERT", "SELECT", "UPDATE",
              "DELETE", "COMPACT")

    def statement(self) -> Statement:
        tok = self.peek()
        if tok.type != KW or tok.value not in self._HEADS:
            raise self.fail(self._HEADS)
        handler = getattr(self, f"_stmt_{tok.value.lower()}")
        return handler()

    def _stmt_create(self) -> CreateTable:
        head = self.take()
        self.expect_kw("TABLE")
        table = self.expect_ident("table name").value
        self.expect_op("(")
        columns = [self._column_def()]
        while self.at_op(","):
            self.take()
            columns.append(self._column_def())
        self.expect_op(")")
        return CreateTable(table, tuple(columns), pos=(head.line, head.col))

    def _column_def(self) -> tuple[str, str]:
        name = self.expect_ident("column name").value
        tok = self.peek()
        if tok.type == IDENT and tok.value in _TYPE_CANON:
            self.take()
            return (name, _TYPE_CANON[tok.value])
        raise self.fail(_TYPE_NAMES)

    def _stmt_drop(self) -> DropTable:
        head = self.take()
        self.expect_kw("TABLE")
        table = self.expect_ident("table name").value
        return DropTable(table, pos=(head.line, head.col))

    def _stmt_load(self) -> Load:
        head = self.take()
        table = self.expect_ident("table name").value
        self.expect_kw("FROM")
        tok = self.peek()
        if tok.type != STRING:
            raise self.fail(("file path string",))
        self.take()
        return Load(table, tok.value, pos=(head.line, head.col))

    def _stmt_insert(self) -> Insert:
        head = self.take()
        self.expect_kw("INTO")
        table = self.expect_ident("table name").value
        self.expect_kw("VALUES")
        rows = [self._value_tuple()]
        while self.at_op(","):
            self.take()
            rows.append(self._value_tuple())
        return Insert(table, tuple(rows), pos=(head.line, head.col))

    def _value_tuple(self) -> tuple[Expr, ...]:
        self.expect_op("(")
        values = [self.expr()]
        while self.at_op(","):
            self.take()
            values.append(self.expr())
        self.expect_op(")")
        return tuple(values)

    def _stmt_select(self) -> Select:
        head = self.take()
        columns: Optional[tuple[str, ...]]
        if self.at_op("*"):
            self.take()
            columns = None
        else:
            names = [self.expect_ident("column name").value]
            while self.at_op(","):
                self.take()
                names.append(self.expect_ident("column name").value)
            columns = tuple(names)
        self.expect_kw("FROM")
        table = self.expect_ident("table name").value
        where = self._optional_where()
        return Select(table, columns, where, pos=(head.line, head.col))

    def _stmt_update(self) -> Update:
        head = self.take()
        table = self.expect_ident("table name").value
        self.expect_kw("SET")
        assignments = [self._assignment()]
        while self.at_op(","):
            self.take()
            assignments.append(self._assignment())
        where = self._optional_where()
        options = self._optional_with()
        return Update(table, tuple(assignments), where, options,
                      pos=(head.line, head.col))

    def _assignment(self) -> tuple[str, Expr]:
        name = self.expect_ident("column name").value
        self.expect_op("=")
        return (name, self.expr())

    def _stmt_delete(self) -> Delete:
        head = self.take()
        self.expect_kw("FROM")
        table = self.expect_ident("table name").value
        where = self._optional_where()
        options = self._optional_with()
        return Delete(table, where, options, pos=(head.line, head.col))

    def _stmt_compact(self) -> Compact:
        head = self.take()
        table = self.expect_ident("table name").value
        return Compact(table, pos=(head.line, head.col))

    def _optional_where(self) -> Optional[Expr]:
        if self.at_kw("WHERE"):
            self.take()
            return self.predicate()
        return None

    def _optional_with(self) -> Options:
        if not self.at_kw("WITH"):
            return Options()
        self.take()
        ratio = k = plan = None
        while True:
            tok = self.peek()
            if self.at_ident("ratio"):
                if ratio is not None:
                    raise ParseError("duplicate RATIO option", tok.line, tok.col)
                self.take()
                self.expect_op("=")
                ratio = self._ratio_value()
            elif self.at_ident("k"):
                if k is not None:
                    raise ParseError("duplicate K option", tok.line, tok.col)
                self.take()
                self.expect_op("=")
                k = self._k_value()
            elif self.at_ident("plan"):
                if plan is not None:
                    raise ParseError("duplicate PLAN option", tok.line, tok.col)
                self.take()
                self.expect_op("=")
                plan = self._plan_value()
            else:
                raise self.fail(("RATIO", "K", "PLAN"))
            if self.at_op(","):
                self.take()
                continue
            break
        return Options(ratio=ratio, k=k, plan=plan)

    def _ratio_value(self) -> float:
        tok = self.peek()
        negative = False
        if self.at_op("-"):
            self.take()
            negative = True
        num = self.peek()
        if num.type != NUMBER:
            raise self.fail(("number in [0, 1]",))
        self.take()
        value = -float(num.value) if negative else float(num.value)
        if not 0.0 <= value <= 1.0:
            raise ParseError(f"RATIO must be in [0, 1], got {value}",
                             tok.line, tok.col)
        return value

    def _k_value(self) -> int:
        tok = self.peek()
        negative = False
        if self.at_op("-"):
            self.take()
            negative = True
        num = self.peek()
        if num.type != NUMBER or not isinstance(num.value, int):
            raise self.fail(("nonnegative integer",))
        self.take()
        value = -num.value if negative else num.value
        if value < 0:
            raise ParseError(f"K must be >= 0, got {value}", tok.line, tok.col)
        return value

    def _plan_value(self) -> str:
        tok = self.peek()
        if tok.type == IDENT and tok.value in ("edit", "overwrite"):
            self.take()
            return tok.value
        raise self.fail(("EDIT", "OVERWRITE"))

    # expressions and predicates
    #
    # precedence, loosest first: OR, AND, comparisons, + -, * /, atoms.
    # Arithmetic is left-associative; comparisons do not chain.

    def predicate(self) -> Expr:
        return self._or_expr()

    def _or_expr(self) -> Expr:
        left = self._and_expr()
        while self.at_kw("OR"):
            tok = self.take()
            right = self._and_expr()
            left = BinOp("OR", left, right, pos=(tok.line, tok.col))
        return left

    def _and_expr(self) -> Expr:
        left = self._cmp_expr()
        while self.at_kw("AND"):
            tok = self.take()
            right = self._cmp_expr()
            left = BinOp("AND", left, right, pos=(tok.line, tok.col))
        return left

    def _cmp_expr(self) -> Expr:
        left = self.expr()
        tok = self.peek()
        if tok.type == OP and tok.value in ("=", "!=", "<", "<=", ">", ">="):
            self.take()
            right = self.expr()
            return BinOp(tok.value, left, right, pos=(tok.line, tok.col))
        return left

    def expr(self) -> Expr:
        left = self._term()
        while True:
            tok = self.peek()
            if tok.type == OP and tok.value in ("+", "-"):
                self.take()
                right = self._term()
                left = BinOp(tok.value, left, right, pos=(tok.line, tok.col))
            else:
                return left

    def _term(self) -> Expr:
        left = self._atom()
        while True:
            tok = self.peek()
            if tok.type == OP and tok.value in ("*", "/"):
                self.take()
                right = self._atom()
                left = BinOp(tok.value, left, right, pos=(tok.line, tok.col))
            else:
                return left

    def _atom(self) -> Expr:
        tok = self.peek()
        if tok.type == NUMBER:
            self.take()
            return Literal(tok.value, pos=(tok.line, tok.col))
        if tok.type == STRING:
            self.take()
            return Literal(tok.value, pos=(tok.line, tok.col))
        if tok.type == KW and tok.value in ("TRUE", "FALSE", "NULL"):
            self.take()
            value = {"TRUE": True, "FALSE": False, "NULL": None}[tok.value]
            return Literal(value, pos=(tok.line, tok.col))
        if tok.type == IDENT:
            self.take()
            return ColumnRef(tok.value, pos=(tok.line, tok.col))
        if tok.type == OP and tok.value == "-":
            self.take()
            num = self.peek()
            if num.type != NUMBER:
                raise self.fail(("number",))
            self.take()
            return Literal(-num.value, pos=(tok.line, tok.col))
        if tok.type == OP and tok.value == "(":
            if self.depth >= _MAX_NESTING:
                raise ParseError("expression nested too deeply", tok.line, tok.col)
            self.take()
            self.depth += 1
            try:
                inner = self.predicate()
            finally:
                self.depth -= 1
            self.expect_op(")")
            return inner
        raise self.fail(("column", "literal", "'('"))


def parse(text: str) -> Statement:
    """Parse exactly one statement (a trailing ';' is allowed)."""
    parser = _Parser(tokenize(text))
    stmt = parser.statement()
    if parser.at_op(";"):
        parser.take()
    if parser.peek().type != EOF:
        raise parser.fail((EOF,))
    return stmt


def parse_script(text: str) -> list[Statement]:
    """Parse a ';'-separated script; positions are global to the text."""
    parser = _Parser(tokenize(text))
    statements: list[Statement] = []
    while True:
        while parser.at_op(";"):
            parser.take()
        if parser.peek().type == EOF:
            return statements
        statements.append(parser.statement())
        if parser.at_op(";"):
            continue
        if parser.peek().type == EOF:
            return statements
        raise parser.fail(("';'", EOF))


# -- canonical printer ------------------------------------------------------------

_PRECEDENCE = {
    "OR": 1, "AND": 2,
    "=": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
}


def _literal_text(value) -> str:
    if value is None:
        return "NULL"
    if value is True:
        return "TRUE"
    if value is False:
        return "FALSE"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return str(value)


def expr_to_text(expr: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(expr, Literal):
        return _literal_text(expr.value)
    if isinstance(expr, ColumnRef):
        return expr.name
    prec = _PRECEDENCE[expr.op]
    left = expr_to_text(expr.left, prec, right_side=False)
    right = expr_to_text(expr.right, prec, right_side=True)
    text = f"{left} {expr.op} {right}"
    if prec < parent_prec or (prec == parent_prec and right_side):
        return f"({text})"
    return text


def to_text(stmt: Statement) -> str:
    """Canonical single-line rendering; reparsing it yields an equal value."""
    if isinstance(stmt, CreateTable):
        cols = ", ".join(f"{name} {ctype}" for name, ctype in stmt.columns)
        return f"CREATE TABLE {stmt.table} ({cols})"
    if isinstance(stmt, DropTable):
        return f"DROP TABLE {stmt.table}"
    if isinstance(stmt, Load):
        return f"LOAD {stmt.table} FROM {_literal_text(stmt.path)}"
    if isinstance(stmt, Insert):
        rows = ", ".join(
            "(" + ", ".join(expr_to_text(v) for v in row) + ")" for row in stmt.rows)
        return f"INSERT INTO {stmt.table} VALUES {rows}"
    if isinstance(stmt, Select):
        cols = "*" if stmt.columns is None else ", ".join(stmt.columns)
        text = f"SELECT {cols} FROM {stmt.table}"
        if stmt.where is not None:
            text += f" WHERE {expr_to_text(stmt.where)}"
        return text
    if isinstance(stmt, Update):
        sets = ", ".join(f"{name} = {expr_to_text(value)}"
                         for name, value in stmt.assignments)
        text = f"UPDATE {stmt.table} SET {sets}"
        if stmt.where is not None:
            text += f" WHERE {expr_to_text(stmt.where)}"
        return text + _options_text(stmt.options)
    if isinstance(stmt, Delete):
        text = f"DELETE FROM {stmt.table}"
        if stmt.where is not None:
            text += f" WHERE {expr_to_text(stmt.where)}"
        return text + _options_text(stmt.options)
    if isinstance(stmt, Compact):
        return f"COMPACT {stmt.table}"
    raise TypeError(f"not a statement: {stmt!r}")


def _options_text(options: Options) -> str:
    if options.is_empty():
        return ""
    parts = []
    if options.ratio is not None:
        parts.append(f"RATIO = {repr(float(options.ratio))}")
    if options.k is not None:
        parts.append(f"K = {options.k}")
    if options.plan is not None:
        parts.append(f"PLAN = {options.plan.upper()}")
    return " WITH " + ", ".join(parts)


# -- statement identity for ratio history ----------------------------------------

def normalize_statement(text: str) -> str:
    """Token-level normal form: casing unified, literals blanked to '?'.

    Two statements that differ only in literal values (the typical shape of
    a recurring parameterized DML) normalize identically, which is what
    lets the ratio history generalize across runs. Unlexable text falls
    back to collapsed lowercase so every string still gets a stable key.
    """
    try:
        tokens = tokenize(text)
    except ParseError:
        return " ".join(text.lower().split())
    parts = []
    for tok in tokens:
        if tok.type == EOF:
            break
        if tok.type in (NUMBER, STRING):
            parts.append("?")
        elif tok.type == OP:
            parts.append(str(tok.value))
        else:  # keywords arrive upper, identifiers lower
            parts.append(str(tok.value).lower())
    return " ".join(parts)


def statement_key(text: str) -> str:
    return hashlib.sha256(normalize_statement(text).encode("utf-8")).hexdigest()
