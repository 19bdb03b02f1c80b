"""Per-column statistics and natural-language descriptions.

Descriptions come from the LLM (batched, at most 25 columns per prompt)
with a deterministic template fallback, and profiles are cached on disk
keyed by a content hash of the CSV bytes, since a table's profile is
question-independent.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field, asdict
from typing import Optional

from .llm_client import ChatRequest, Message
from .table_core import (
    ColumnKind,
    Table,
    extract_numeric,
    render_cell,
)

PROFILER_VERSION = "1"
DEFAULT_EXAMPLE_COUNT = 3


@dataclass
class ColumnProfile:
    name: str
    kind: ColumnKind
    description: str = ""
    null_count: int = 0
    distinct_count: int = 0
    example_values: list[str] = field(default_factory=list)
    min: Optional[float] = None
    max: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @staticmethod
    def from_dict(d: dict) -> "ColumnProfile":
        d = dict(d)
        d["kind"] = ColumnKind(d["kind"])
        return ColumnProfile(**d)


def fallback_description(profile: ColumnProfile) -> str:
    examples = ", ".join(profile.example_values)
    return (f"Column '{profile.name}' of type {profile.kind.value} "
            f"with example values: {examples}")


def profile_table(t: Table, example_count: int = DEFAULT_EXAMPLE_COUNT) -> list[ColumnProfile]:
    """One profile per column; descriptions stay empty here and are
    filled by describe_columns (or its fallback template)."""
    profiles = []
    for col in t.columns:
        counts: dict[str, int] = {}
        order: list[str] = []
        nulls = 0
        for c in col.cells:
            if c is None:
                nulls += 1
                continue
            key = render_cell(c)
            if key not in counts:
                counts[key] = 0
                order.append(key)
            counts[key] += 1
        examples = sorted(order, key=lambda k: -counts[k])[:example_count]
        lo = hi = None
        if col.kind in (ColumnKind.NUMERIC, ColumnKind.MIXED_NUMERIC):
            numbers = [x for x in (extract_numeric(c) for c in col.cells) if x is not None]
            if numbers:
                lo, hi = min(numbers), max(numbers)
        profiles.append(ColumnProfile(
            name=col.name,
            kind=col.kind,
            null_count=nulls,
            distinct_count=len(counts),
            example_values=examples,
            min=lo,
            max=hi,
        ))
    return profiles


DESCRIBE_SYSTEM = (
    "You describe the columns of a tabular dataset. For each column you "
    "are given its name, inferred type, statistics and example values. "
    "Reply with a JSON object mapping each column name to a one-sentence "
    "description of what the column contains."
)


def _describe_prompt(profiles: list[ColumnProfile]) -> str:
    lines = ["Describe the following columns:", ""]
    for p in profiles:
        stats = f"type={p.kind.value}, nulls={p.null_count}, distinct={p.distinct_count}"
        if p.min is not None:
            stats += f", min={p.min:g}, max={p.max:g}"
        examples = ", ".join(p.example_values) or "(none)"
        lines.append(f"- {p.name} ({stats}; examples: {examples})")
    lines.append("")
    lines.append('Reply with a JSON object: {"<column name>": "<description>", ...}')
    return "\n".join(lines)


def _extract_json_object(text: str) -> Optional[dict]:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text[m.start():])
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def describe_columns(profiles: list[ColumnProfile], t: Table, llm=None,
                     chunk_size: int = 25) -> list[ColumnProfile]:
    """Fill each profile's description, batching at most `chunk_size`
    columns per LLM prompt; any failure falls back to the template."""
    for p in profiles:
        p.description = fallback_description(p)
    if llm is None:
        return profiles
    for start in range(0, len(profiles), chunk_size):
        chunk = profiles[start:start + chunk_size]
        try:
            reply = llm.complete(ChatRequest(
                messages=(Message("system", DESCRIBE_SYSTEM),
                          Message("user", _describe_prompt(chunk))),
                stage_tag="descriptor",
            ))
            parsed = _extract_json_object(reply)
        except Exception:
            parsed = None
        if not parsed:
            continue
        for p in chunk:
            desc = parsed.get(p.name)
            if isinstance(desc, str) and desc.strip():
                p.description = desc.strip()
    return profiles


def table_fingerprint(csv_bytes: bytes) -> str:
    h = hashlib.sha256()
    h.update(csv_bytes)
    h.update(b"|v" + PROFILER_VERSION.encode())
    return h.hexdigest()


class ProfileCache:
    """One JSON document per table fingerprint in a cache directory.
    Corrupt entries are treated as misses and evicted."""

    def __init__(self, cache_dir: str):
        self.cache_dir = cache_dir
        os.makedirs(cache_dir, exist_ok=True)

    def _path(self, fingerprint: str) -> str:
        return os.path.join(self.cache_dir, f"{fingerprint}.json")

    def get(self, fingerprint: str) -> Optional[list[ColumnProfile]]:
        path = self._path(fingerprint)
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            return [ColumnProfile.from_dict(d) for d in data]
        except FileNotFoundError:
            return None
        except (ValueError, KeyError, TypeError):
            os.remove(path)
            return None

    def put(self, fingerprint: str, profiles: list[ColumnProfile]) -> None:
        with open(self._path(fingerprint), "w", encoding="utf-8") as fh:
            json.dump([p.to_dict() for p in profiles], fh, ensure_ascii=False, indent=2)
