"""The fixed library of generic table functions exposed to plans.

Every function takes and returns value-semantics Tables.  Column
arguments are corrected against the schema with Levenshtein snapping
before use.  Numeric predicates go through extract_numeric per cell, so
mixed columns like "10 - Le votaría siempre" still filter correctly;
cells with no extractable number never satisfy a numeric predicate.

Fuzzy value matching lives only in the contains-family (filter_contains,
exists_value, count_containing and the subset variants); the exact-match
family (count_equal, delete_rows_by_column_value) never goes fuzzy.
"""

from __future__ import annotations

from typing import Optional, Union

from .fuzzy import FuzzyConfig, best_fuzzy_match, correct_name
from .table_core import (
    Cell,
    Column,
    ColumnKind,
    Table,
    cells_equal,
    extract_numeric,
    render_cell,
)

NO_MATCHING_RECORDS = "No matching records were found"

FLATTEN_DELIMITERS = (";", ",", "|")


class TableFnError(Exception):
    """Raised by table functions on contract violations (missing column,
    non-numeric column, empty subset...)."""


def _resolve(t: Table, column: str) -> Column:
    if not t.columns:
        raise TableFnError(f"column {column!r} not found: table has no columns")
    return t.column(correct_name(column, t.column_names))


def flatten_column_values(t: Table, column: str) -> Table:
    """Explode multi-valued text cells into one row per value.

    A cell splits on the first of ";", ",", "|" that occurs in it; split
    values are trimmed.  Single-valued rows pass through.
    """
    col = _resolve(t, column)
    new_rows: list[list[Cell]] = []
    col_idx = t.column_names.index(col.name)
    for i in range(t.row_count):
        cell = col.cells[i]
        parts: list[Cell] = [cell]
        if isinstance(cell, str):
            for delim in FLATTEN_DELIMITERS:
                if delim in cell:
                    parts = [p.strip() or None for p in cell.split(delim)]
                    break
        for part in parts:
            row = t.row(i)
            row[col_idx] = part
            new_rows.append(row)
    columns = tuple(
        Column(c.name, c.kind, tuple(row[j] for row in new_rows))
        for j, c in enumerate(t.columns)
    )
    return Table(t.name, columns)


def top_n_non_missing(t: Table, column: str, n: int, end: str = "head") -> Table:
    """First (head) or last (tail) n rows whose cell is non-missing, in
    original order; fewer than n available returns all of them."""
    if n < 0:
        raise TableFnError(f"n must be >= 0, got {n}")
    if end not in ("head", "tail"):
        raise TableFnError(f"end must be 'head' or 'tail', got {end!r}")
    col = _resolve(t, column)
    idx = [i for i in range(t.row_count) if col.cells[i] is not None]
    chosen = idx[:n] if end == "head" else idx[len(idx) - min(n, len(idx)):]
    return t.take_rows(chosen)


def delete_rows_by_column_value(t: Table, column: str, value: Cell) -> Table:
    """Drop rows whose cell equals `value` exactly (numeric equality for
    numbers; value=None drops missing-valued rows).  No fuzzy fallback."""
    col = _resolve(t, column)
    keep = [i for i in range(t.row_count) if not cells_equal(col.cells[i], value)]
    return t.take_rows(keep)


def sort_alphabetical(t: Table, column: str) -> Table:
    """Stable ascending sort by case-insensitive text rendering; missing
    cells sort last."""
    col = _resolve(t, column)
    order = sorted(
        range(t.row_count),
        key=lambda i: (col.cells[i] is None, render_cell(col.cells[i]).lower()),
    )
    return t.take_rows(order)


_COMPARATORS = {
    "le": lambda x, v: x <= v,
    "lt": lambda x, v: x < v,
    "ge": lambda x, v: x >= v,
    "gt": lambda x, v: x > v,
}


def filter_numeric(t: Table, column: str, cmp: str, value: float) -> Table:
    """Keep rows where the cell's extracted number satisfies the
    comparator; cells with no extractable number are excluded."""
    if cmp not in _COMPARATORS:
        raise TableFnError(f"unknown comparator {cmp!r}")
    col = _resolve(t, column)
    extracted = [extract_numeric(c) for c in col.cells]
    present = [c for c in col.cells if c is not None]
    if present and all(x is None for x in extracted):
        raise TableFnError(f"non-numeric column {col.name!r}")
    op = _COMPARATORS[cmp]
    keep = [i for i, x in enumerate(extracted) if x is not None and op(x, float(value))]
    return t.take_rows(keep)


def _contains_round1(col: Column, value: Cell) -> list[int]:
    needle = render_cell(value).strip().lower()
    return [
        i for i, c in enumerate(col.cells)
        if c is not None and needle in render_cell(c).lower()
    ]


def filter_contains(t: Table, column: str, value: Cell,
                    fuzzy_cfg: FuzzyConfig = FuzzyConfig()) -> Table:
    """Two-round containment filter.

    Round 1 keeps rows whose cell text contains the value's text as a
    case-insensitive substring.  If that yields nothing and the column is
    textual, round 2 looks for the best fuzzy match over the column's
    values (filter threshold, default 75) and keeps rows exactly equal to
    the matched value.
    """
    col = _resolve(t, column)
    keep = _contains_round1(col, value)
    if keep:
        return t.take_rows(keep)
    textual = col.kind in (ColumnKind.CATEGORICAL, ColumnKind.MIXED_NUMERIC)
    if textual and isinstance(value, str) and value != "":
        match = best_fuzzy_match(col.cells, value, fuzzy_cfg.filter_threshold)
        if match is not None:
            fuzzy_keep = [i for i, c in enumerate(col.cells) if cells_equal(c, match)]
            if fuzzy_keep:
                return t.take_rows(fuzzy_keep)
    return t.take_rows(keep)


def filter_not_contains(t: Table, column: str, value: Cell) -> Table:
    """Complement of round-1 containment; the fuzzy round never applies
    to negation."""
    col = _resolve(t, column)
    hit = set(_contains_round1(col, value))
    return t.take_rows([i for i in range(t.row_count) if i not in hit])


def exists_value(t: Table, column: str, value: Cell,
                 fuzzy_cfg: FuzzyConfig = FuzzyConfig()) -> bool:
    return filter_contains(t, column, value, fuzzy_cfg).row_count > 0


def count_equal(t: Table, column: str, value: Cell) -> int:
    """Exact, case-sensitive count; no fuzzy fallback."""
    col = _resolve(t, column)
    return sum(1 for c in col.cells if cells_equal(c, value))


def count_containing(t: Table, column: str, value: Cell,
                     fuzzy_cfg: FuzzyConfig = FuzzyConfig()) -> int:
    return filter_contains(t, column, value, fuzzy_cfg).row_count


def most_frequent(t: Table, column: str,
                  n: Optional[int] = None) -> Union[Cell, list[Cell]]:
    """Mode of the non-missing cells (n omitted), or the n most frequent
    values ordered by descending count then first occurrence."""
    if n is not None and n < 1:
        raise TableFnError(f"n must be >= 1, got {n}")
    col = _resolve(t, column)
    counts: dict[str, int] = {}
    first_cell: dict[str, Cell] = {}
    order: list[str] = []
    for c in col.cells:
        if c is None:
            continue
        key = render_cell(c)
        if key not in counts:
            counts[key] = 0
            first_cell[key] = c
            order.append(key)
        counts[key] += 1
    if not counts:
        raise TableFnError(f"no values in column {col.name!r}")
    ranked = sorted(order, key=lambda k: (-counts[k], order.index(k)))
    if n is None:
        return first_cell[ranked[0]]
    return [first_cell[k] for k in ranked[:n]]


def most_frequent_in_subset(t: Table, target_column: str, subset_column: str,
                            filter_value: Cell, n: Optional[int] = None,
                            fuzzy_cfg: FuzzyConfig = FuzzyConfig()) -> Union[Cell, list[Cell]]:
    """most_frequent over the rows matching filter_value in subset_column
    (two-round contains semantics); an empty subset raises the sentinel
    message."""
    _resolve(t, target_column)
    sub = filter_contains(t, subset_column, filter_value, fuzzy_cfg)
    if sub.row_count == 0:
        raise TableFnError(NO_MATCHING_RECORDS)
    return most_frequent(sub, target_column, n)
