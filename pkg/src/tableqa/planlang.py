"""The loop-free plan DSL: grammar, parser, validator and canonical
printer.

A plan is a straight-line sequence of bindings ending in an `answer =`
line.  There are no loops, conditionals or user-defined functions, so
every plan terminates after at most bindings+1 builtin calls.

Grammar:
    program := line+
    line    := IDENT "=" expr
    expr    := IDENT "(" [expr ("," expr)*] ")"
             | NUMBER | STRING | true | false
             | "[" [literal ("," literal)*] "]"
             | IDENT
Comments start with '#'; blank lines are ignored.  Code fences and a
leading language tag in LLM output are stripped before parsing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .fuzzy import correct_name, similarity
from .table_core import Cell


class PlanSyntaxError(Exception):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class PlanValidationError(Exception):
    pass


@dataclass(frozen=True)
class Literal:
    value: Union[Cell, tuple]


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expr = Union[Literal, Ref, Call]


@dataclass(frozen=True)
class Plan:
    bindings: tuple[tuple[str, Expr], ...]
    answer: Expr


@dataclass(frozen=True)
class Builtin:
    name: str
    arity: int
    signature: str
    doc: str
    # Argument indices holding a column name (string literal) for the
    # validator to snap to the schema.
    column_args: tuple[int, ...] = ()


_BUILTINS: list[Builtin] = [
    Builtin("flatten_column_values", 2, "flatten_column_values(table, column) -> table",
            "Split multi-valued cells (';', ',' or '|' separated) into one row per value.",
            (1,)),
    Builtin("top_n_non_missing", 3, "top_n_non_missing(table, column, n) -> table",
            "First n rows whose cell in the column is not missing, original order.", (1,)),
    Builtin("tail_n_non_missing", 3, "tail_n_non_missing(table, column, n) -> table",
            "Last n rows whose cell in the column is not missing, original order.", (1,)),
    Builtin("delete_rows_by_column_value", 3,
            "delete_rows_by_column_value(table, column, value) -> table",
            "Remove rows whose cell equals the value exactly.", (1,)),
    Builtin("sort_alphabetical", 2, "sort_alphabetical(table, column) -> table",
            "Sort rows alphabetically (case-insensitive) by the column; missing last.", (1,)),
    Builtin("filter_le", 3, "filter_le(table, column, number) -> table",
            "Keep rows whose numeric value in the column is <= the number.", (1,)),
    Builtin("filter_lt", 3, "filter_lt(table, column, number) -> table",
            "Keep rows whose numeric value in the column is < the number.", (1,)),
    Builtin("filter_ge", 3, "filter_ge(table, column, number) -> table",
            "Keep rows whose numeric value in the column is >= the number.", (1,)),
    Builtin("filter_gt", 3, "filter_gt(table, column, number) -> table",
            "Keep rows whose numeric value in the column is > the number.", (1,)),
    Builtin("filter_contains", 3, "filter_contains(table, column, value) -> table",
            "Keep rows whose cell contains the value (case-insensitive substring; "
            "falls back to fuzzy matching of the stored value).", (1,)),
    Builtin("filter_not_contains", 3, "filter_not_contains(table, column, value) -> table",
            "Keep rows whose cell does NOT contain the value.", (1,)),
    Builtin("exists_value", 3, "exists_value(table, column, value) -> boolean",
            "Whether any row's cell contains the value.", (1,)),
    Builtin("count_equal", 3, "count_equal(table, column, value) -> number",
            "Count cells exactly equal to the value (case-sensitive).", (1,)),
    Builtin("count_containing", 3, "count_containing(table, column, value) -> number",
            "Count rows whose cell contains the value.", (1,)),
    Builtin("most_frequent", 2, "most_frequent(table, column) -> value",
            "The most frequent value in the column.", (1,)),
    Builtin("most_frequent_n", 3, "most_frequent_n(table, column, n) -> list",
            "The n most frequent values in the column, most frequent first.", (1,)),
    Builtin("most_frequent_in_subset", 4,
            "most_frequent_in_subset(table, target_column, subset_column, filter_value) -> value",
            "Most frequent value in target_column among rows matching filter_value.",
            (1, 2)),
    Builtin("most_frequent_n_in_subset", 5,
            "most_frequent_n_in_subset(table, target_column, subset_column, filter_value, n) -> list",
            "The n most frequent values in target_column among matching rows.", (1, 2)),
    Builtin("column", 2, "column(table, column) -> list",
            "The list of cell values of the column.", (1,)),
    Builtin("count_rows", 1, "count_rows(table) -> number",
            "Number of rows in the table."),
    Builtin("unique", 1, "unique(list) -> list",
            "Distinct values, first occurrence order, missing dropped."),
    Builtin("length", 1, "length(list) -> number", "Number of elements."),
    Builtin("sum", 1, "sum(list) -> number",
            "Sum of the numeric values of the elements (missing skipped)."),
    Builtin("mean", 1, "mean(list) -> number",
            "Mean of the numeric values of the elements (missing skipped)."),
    Builtin("min_of", 1, "min_of(list) -> number",
            "Minimum numeric value among the elements."),
    Builtin("max_of", 1, "max_of(list) -> number",
            "Maximum numeric value among the elements."),
    Builtin("head_n", 2, "head_n(list, n) -> list", "First n elements."),
    Builtin("sort_asc", 1, "sort_asc(list) -> list", "Sort ascending."),
    Builtin("sort_desc", 1, "sort_desc(list) -> list", "Sort descending."),
    Builtin("add", 2, "add(number, number) -> number", "Addition."),
    Builtin("sub", 2, "sub(number, number) -> number", "Subtraction."),
    Builtin("mul", 2, "mul(number, number) -> number", "Multiplication."),
    Builtin("div", 2, "div(number, number) -> number",
            "Division; dividing by zero is a runtime error."),
    Builtin("gt", 2, "gt(scalar, scalar) -> boolean", "Greater than."),
    Builtin("ge", 2, "ge(scalar, scalar) -> boolean", "Greater or equal."),
    Builtin("lt", 2, "lt(scalar, scalar) -> boolean", "Less than."),
    Builtin("le", 2, "le(scalar, scalar) -> boolean", "Less or equal."),
    Builtin("eq", 2, "eq(scalar, scalar) -> boolean", "Equality."),
    Builtin("not_", 1, "not_(boolean) -> boolean", "Logical negation."),
    Builtin("to_number", 1, "to_number(scalar) -> number",
            "Extract a number from a scalar (first number in a string)."),
    Builtin("first", 1, "first(list) -> value", "First element of a list."),
]

BUILTINS: dict[str, Builtin] = {b.name: b for b in _BUILTINS}


def dsl_reference() -> str:
    """Human/LLM-readable reference for the plan language; this same
    text is embedded in the coder prompt and emitted by the CLI."""
    lines = [
        "PLAN LANGUAGE REFERENCE",
        "",
        "A plan is a sequence of assignment lines. Each line binds a name to",
        "the result of a builtin call. The input table is available as `df`.",
        "The last line must assign the final result to `answer`.",
        "",
        "    x = filter_contains(df, \"Mes\", \"Enero\")",
        "    answer = count_rows(x)",
        "",
        "Literals: numbers (1, 2.5, -3), double-quoted strings, true, false,",
        "and lists of literals like [1, 2, 3]. Comments start with '#'.",
        "There are no loops, conditionals or user-defined functions.",
        "",
        "Builtins:",
    ]
    for b in _BUILTINS:
        lines.append(f"  {b.signature}")
        lines.append(f"      {b.doc}")
    return "\n".join(lines)


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#.*)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+))
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[=(),\[\]])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize_line(text: str, lineno: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PlanSyntaxError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            tokens.append(_Token(kind, m.group(0), lineno, pos + 1))
        pos = m.end()
    return tokens


def strip_llm_wrapping(text: str) -> str:
    """Remove markdown code fences and a leading language tag."""
    text = text.strip()
    m = re.search(r"```[a-zA-Z]*\n(.*?)```", text, re.DOTALL)
    if m:
        text = m.group(1)
    return text.strip()


class _LineParser:
    def __init__(self, tokens: list[_Token], lineno: int):
        self.tokens = tokens
        self.lineno = lineno
        self.pos = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expected: Optional[str] = None) -> _Token:
        tok = self.peek()
        if tok is None:
            last_col = self.tokens[-1].column if self.tokens else 1
            raise PlanSyntaxError("unexpected end of line", self.lineno, last_col)
        if expected is not None and tok.text != expected:
            raise PlanSyntaxError(f"expected {expected!r}, got {tok.text!r}",
                                  self.lineno, tok.column)
        self.pos += 1
        return tok

    def parse_expr(self) -> Expr:
        tok = self.next()
        if tok.kind == "number":
            return Literal(float(tok.text))
        if tok.kind == "string":
            return Literal(_unquote(tok.text))
        if tok.kind == "ident":
            if tok.text == "true":
                return Literal(True)
            if tok.text == "false":
                return Literal(False)
            nxt = self.peek()
            if nxt is not None and nxt.text == "(":
                return self.parse_call(tok.text)
            return Ref(tok.text)
        if tok.text == "[":
            return self.parse_list()
        raise PlanSyntaxError(f"unexpected token {tok.text!r}", self.lineno, tok.column)

    def parse_call(self, fn: str) -> Call:
        self.next("(")
        args: list[Expr] = []
        nxt = self.peek()
        if nxt is not None and nxt.text == ")":
            self.next(")")
            return Call(fn, ())
        while True:
            args.append(self.parse_expr())
            tok = self.next()
            if tok.text == ")":
                return Call(fn, tuple(args))
            if tok.text != ",":
                raise PlanSyntaxError(f"expected ',' or ')', got {tok.text!r}",
                                      self.lineno, tok.column)

    def parse_list(self) -> Literal:
        items: list[Cell] = []
        nxt = self.peek()
        if nxt is not None and nxt.text == "]":
            self.next("]")
            return Literal(())
        while True:
            tok = self.next()
            if tok.kind == "number":
                items.append(float(tok.text))
            elif tok.kind == "string":
                items.append(_unquote(tok.text))
            elif tok.kind == "ident" and tok.text in ("true", "false"):
                items.append(tok.text == "true")
            else:
                raise PlanSyntaxError(
                    f"only literals are allowed inside lists, got {tok.text!r}",
                    self.lineno, tok.column)
            tok = self.next()
            if tok.text == "]":
                return Literal(tuple(items))
            if tok.text != ",":
                raise PlanSyntaxError(f"expected ',' or ']', got {tok.text!r}",
                                      self.lineno, tok.column)


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def parse_plan(text: str) -> Plan:
    """Parse plan source into a Plan; raises PlanSyntaxError with
    line/column and a one-line message suitable for repair prompts."""
    text = strip_llm_wrapping(text)
    bindings: list[tuple[str, Expr]] = []
    answer: Optional[Expr] = None
    answer_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize_line(raw, lineno)
        if not tokens:
            continue
        if answer is not None:
            raise PlanSyntaxError("no lines allowed after the answer line", lineno)
        if tokens[0].kind != "ident":
            raise PlanSyntaxError(f"line must start with a name, got {tokens[0].text!r}",
                                  lineno, tokens[0].column)
        parser = _LineParser(tokens, lineno)
        name_tok = parser.next()
        parser.next("=")
        expr = parser.parse_expr()
        trailing = parser.peek()
        if trailing is not None:
            raise PlanSyntaxError(f"unexpected trailing token {trailing.text!r}",
                                  lineno, trailing.column)
        if name_tok.text == "answer":
            answer = expr
            answer_line = lineno
        else:
            bindings.append((name_tok.text, expr))
    if answer is None:
        raise PlanSyntaxError("plan must end with an 'answer =' line",
                              answer_line or 1)
    return Plan(tuple(bindings), answer)


def _walk_validate(expr: Expr, defined: set[str], schema: Sequence[str]) -> Expr:
    if isinstance(expr, Ref):
        if expr.name not in defined:
            raise PlanValidationError(f"undefined reference '{expr.name}'")
        return expr
    if isinstance(expr, Literal):
        return expr
    builtin = BUILTINS.get(expr.fn)
    if builtin is None:
        suggestion = max(BUILTINS, key=lambda n: similarity(n, expr.fn))
        raise PlanValidationError(
            f"unknown builtin '{expr.fn}' (did you mean '{suggestion}'?)")
    if len(expr.args) != builtin.arity:
        raise PlanValidationError(
            f"'{expr.fn}' takes {builtin.arity} arguments, got {len(expr.args)}")
    args = []
    for i, arg in enumerate(expr.args):
        arg = _walk_validate(arg, defined, schema)
        if i in builtin.column_args and isinstance(arg, Literal) \
                and isinstance(arg.value, str) and schema:
            arg = Literal(correct_name(arg.value, list(schema)))
        args.append(arg)
    return Call(expr.fn, tuple(args))


def validate_plan(plan: Plan, schema: Sequence[str]) -> Plan:
    """Check builtins, arities, reference ordering; snap column-name
    string literals to the schema.  Idempotent."""
    defined = {"df"}
    bindings = []
    for name, expr in plan.bindings:
        bindings.append((name, _walk_validate(expr, defined, schema)))
        defined.add(name)
    answer = _walk_validate(plan.answer, defined, schema)
    return Plan(tuple(bindings), answer)


def _render_expr(expr: Expr) -> str:
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.fn}({', '.join(_render_expr(a) for a in expr.args)})"
    value = expr.value
    if isinstance(value, tuple):
        return "[" + ", ".join(_render_literal(v) for v in value) + "]"
    return _render_literal(value)


def _render_literal(value: Cell) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        f = float(value)
        return str(int(f)) if f.is_integer() else repr(f)
    return _quote(str(value))


def render_plan(plan: Plan) -> str:
    """Canonical text; parse_plan(render_plan(p)) structurally equals p."""
    lines = [f"{name} = {_render_expr(expr)}" for name, expr in plan.bindings]
    lines.append(f"answer = {_render_expr(plan.answer)}")
    return "\n".join(lines)
