"""String similarity and fuzzy matching.

Two different distances are used on purpose: value matching uses the
normalized indel ratio (insertions/deletions only, substitutions cost 2),
while column-name correction uses plain Levenshtein distance with unit
costs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .table_core import Cell, render_cell


@dataclass(frozen=True)
class FuzzyConfig:
    match_threshold: int = 90
    filter_threshold: int = 75

    def __post_init__(self) -> None:
        for t in (self.match_threshold, self.filter_threshold):
            if not 0 <= t <= 100:
                raise ValueError(f"threshold {t} outside 0..100")


def _lcs_length(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ch in a:
        cur = [0] * (len(b) + 1)
        for j, bj in enumerate(b, start=1):
            if ch == bj:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """Normalized indel similarity on a 0..100 scale.

    100 * (1 - D_indel(a, b) / (|a| + |b|)), where D_indel counts only
    insertions and deletions.  Two empty strings score 100.  Callers are
    responsible for lowercasing.
    """
    total = len(a) + len(b)
    if total == 0:
        return 100.0
    indel = total - 2 * _lcs_length(a, b)
    return 100.0 * (1.0 - indel / total)


def levenshtein(a: str, b: str) -> int:
    """Classic edit distance with unit-cost insert/delete/substitute."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def best_fuzzy_match(values: Sequence[Cell], target: str, threshold: int) -> Optional[Cell]:
    """Best-scoring value against `target`, or None below `threshold`.

    Values are deduplicated (first occurrence kept), missing dropped, and
    compared lowercased.  A score exactly at the threshold matches.  Ties
    keep the first value in deduplicated order.
    """
    seen = set()
    best_val: Optional[Cell] = None
    best_score = -1.0
    target_lower = target.lower()
    for v in values:
        if v is None:
            continue
        text = render_cell(v)
        if text in seen:
            continue
        seen.add(text)
        score = similarity(text.lower(), target_lower)
        if score > best_score:
            best_val, best_score = v, score
    if best_val is not None and best_score >= threshold:
        return best_val
    return None


def correct_name(name: str, candidates: Sequence[str]) -> str:
    """Snap `name` to the closest candidate by Levenshtein distance.

    An exact match passes through; otherwise the minimal-distance
    candidate wins, ties broken by candidate order.  No lowercasing here.
    """
    if not candidates:
        raise ValueError("correct_name requires at least one candidate")
    if name in candidates:
        return name
    best = candidates[0]
    best_dist = levenshtein(name, best)
    for cand in candidates[1:]:
        dist = levenshtein(name, cand)
        if dist < best_dist:
            best, best_dist = cand, dist
    return best
