"""Batched pipeline orchestration, majority-voting ensemble, and
benchmark scoring.

Stages run as barriers: every question finishes profiling before any
question is selected, and so on.  Each repetition of the ensemble is one
full batched pass; failed runs and sentinel answers ("No matching
records were found") are discarded before voting, and a question with no
surviving runs abstains (scored incorrect).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .answerer import (
    Answer,
    AnswerType,
    CompareConfig,
    FormatError,
    compare_answers,
    format_answer,
    interpret_answer,
)
from .explainer import (
    InstructionParseError,
    InstructionSet,
    build_explainer_prompt,
    clarify,
    request_instructions,
)
from .fuzzy import FuzzyConfig
from .profiler import (
    ProfileCache,
    describe_columns,
    profile_table,
    table_fingerprint,
)
from .runner import build_coder_prompt, solve
from .selector import SelectorConfig, prune_uninformative, select_columns
from .table_core import LoadOptions, Table, load_csv, render_cell

DEFAULT_SENTINELS = ["No matching records were found"]


@dataclass
class Question:
    id: str
    table_id: str
    text: str
    answer_type: AnswerType
    gold: Optional[Answer] = None


@dataclass
class EnsembleConfig:
    repetitions: int = 8
    sentinel_messages: list[str] = field(default_factory=lambda: list(DEFAULT_SENTINELS))

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass
class RunRecord:
    """Outcome of one pipeline pass over one question."""
    question_id: str
    repetition: int
    answer: Optional[Answer] = None
    failure: Optional[str] = None
    trace: dict = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.answer is not None


class TraceWriter:
    """Per-question, per-repetition explainability artifacts on disk."""

    def __init__(self, root: Optional[str]):
        self.root = root

    def write(self, question_id: str, repetition: int, name: str, payload) -> None:
        if self.root is None:
            return
        directory = os.path.join(self.root, question_id, f"rep{repetition}")
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, name)
        if isinstance(payload, str):
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(payload)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, ensure_ascii=False, indent=2)

    def write_question(self, question_id: str, name: str, payload) -> None:
        if self.root is None:
            return
        directory = os.path.join(self.root, question_id)
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)


@dataclass
class PipelineContext:
    llm: object
    cache_dir: Optional[str] = None
    trace_dir: Optional[str] = None
    use_interpreter: bool = False
    fuzzy: FuzzyConfig = field(default_factory=FuzzyConfig)
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    max_attempts: int = 5
    load_options: LoadOptions = field(default_factory=LoadOptions)


def load_table_profiles(path: str, ctx: PipelineContext):
    """Load a CSV and profile it, reusing the on-disk cache when the
    file bytes are unchanged."""
    table = load_csv(path, ctx.load_options)
    with open(path, "rb") as fh:
        fingerprint = table_fingerprint(fh.read())
    cache = ProfileCache(ctx.cache_dir) if ctx.cache_dir else None
    profiles = cache.get(fingerprint) if cache else None
    cached = profiles is not None
    if profiles is None:
        profiles = profile_table(table)
        profiles = describe_columns(profiles, table, ctx.llm)
        if cache:
            cache.put(fingerprint, profiles)
    return table, profiles, cached


def run_pipeline_batch(questions: list[Question], tables_dir: str,
                       ctx: PipelineContext, repetition: int = 0) -> list[RunRecord]:
    """One full pass over all questions with stage barriers:
    profile -> prune+select -> explain+clarify -> solve -> format."""
    trace = TraceWriter(ctx.trace_dir)
    records = [RunRecord(q.id, repetition) for q in questions]

    # Stage 1: profile (once per distinct table).
    tables: dict[str, Table] = {}
    profiles_by_table: dict[str, list] = {}
    for q in questions:
        if q.table_id in tables:
            continue
        path = os.path.join(tables_dir, f"{q.table_id}.csv")
        try:
            table, profiles, _ = load_table_profiles(path, ctx)
        except Exception as exc:
            for rec, qq in zip(records, questions):
                if qq.table_id == q.table_id:
                    rec.failure = f"profile: {exc}"
            continue
        tables[q.table_id] = table
        profiles_by_table[q.table_id] = profiles

    # Stage 2: prune + select.
    selected: dict[str, list] = {}
    for rec, q in zip(records, questions):
        if rec.failure:
            continue
        profiles = profiles_by_table[q.table_id]
        kept, dropped = prune_uninformative(profiles, ctx.selector)
        warnings: list[str] = []
        chosen = select_columns(q.text, kept, ctx.llm, ctx.selector, warnings)
        selected[q.id] = chosen
        trace.write(q.id, repetition, "selector.json", {
            "dropped_by_rule": dropped,
            "selected": [p.name for p in chosen],
            "warnings": warnings,
        })

    # Stage 3: explain + clarify.
    instructions: dict[str, InstructionSet] = {}
    for rec, q in zip(records, questions):
        if rec.failure:
            continue
        table = tables[q.table_id]
        profiles = profiles_by_table[q.table_id]
        chosen = selected[q.id]
        try:
            trace.write(q.id, repetition, "explainer_prompt.txt",
                        build_explainer_prompt(q.text, chosen))
            inst = request_instructions(q.text, chosen, ctx.llm)
            inst = clarify(inst, table, profiles, ctx.fuzzy)
        except (InstructionParseError, ValueError) as exc:
            rec.failure = f"explain: {exc}"
            continue
        instructions[q.id] = inst
        trace.write(q.id, repetition, "instruction_set.json", inst.to_dict())

    # Stage 4: solve.
    for rec, q in zip(records, questions):
        if rec.failure:
            continue
        table = tables[q.table_id]
        inst = instructions[q.id]
        chosen = selected[q.id]
        trace.write(q.id, repetition, "coder_prompt.txt",
                    build_coder_prompt(inst, chosen))
        run = solve(inst, table, chosen, ctx.llm, ctx.max_attempts, ctx.fuzzy)
        rec.trace = run.to_dict()
        trace.write(q.id, repetition, "run_trace.json", rec.trace)
        if not run.succeeded:
            last = run.attempts[-1] if run.attempts else None
            rec.failure = f"solve: {last.error_message if last else 'no attempts'}"
            continue

        # Stage 5: format (or interpret).
        try:
            if ctx.use_interpreter:
                rec.answer = interpret_answer(q.text, run.final_value,
                                              q.answer_type, ctx.llm)
            else:
                rec.answer = format_answer(run.final_value, q.answer_type)
        except FormatError as exc:
            rec.failure = f"format: {exc}"
    return records


def _is_sentinel(answer: Answer, sentinels: list[str]) -> bool:
    value = answer.value
    texts = [str(v) for v in value] if isinstance(value, list) else [render_cell(value) if not isinstance(value, str) else value]
    return any(t in sentinels for t in texts)


def vote(records: list[RunRecord], cfg: EnsembleConfig) -> Optional[Answer]:
    """Plurality vote over canonical answer serializations.

    Failed or sentinel runs are discarded; ties break toward the answer
    whose first surviving repetition index is lowest; no survivors means
    abstain (None).
    """
    survivors = [
        r for r in sorted(records, key=lambda r: r.repetition)
        if r.succeeded and not _is_sentinel(r.answer, cfg.sentinel_messages)
    ]
    if not survivors:
        return None
    counts: dict[str, int] = {}
    first_rep: dict[str, int] = {}
    by_key: dict[str, Answer] = {}
    for r in survivors:
        key = r.answer.canonical_key()
        if key not in counts:
            counts[key] = 0
            first_rep[key] = r.repetition
            by_key[key] = r.answer
        counts[key] += 1
    best = min(counts, key=lambda k: (-counts[k], first_rep[k]))
    return by_key[best]


def ensemble_answers(questions: list[Question], tables_dir: str,
                     ctx: PipelineContext, cfg: EnsembleConfig
                     ) -> tuple[dict[str, Optional[Answer]], dict[str, list[RunRecord]]]:
    """Run the batched pipeline `repetitions` times and vote per
    question.  Returns final answers (None = abstain) and all records."""
    all_records: dict[str, list[RunRecord]] = {q.id: [] for q in questions}
    for rep in range(cfg.repetitions):
        for rec in run_pipeline_batch(questions, tables_dir, ctx, rep):
            all_records[rec.question_id].append(rec)
    finals: dict[str, Optional[Answer]] = {}
    trace = TraceWriter(ctx.trace_dir)
    for q in questions:
        finals[q.id] = vote(all_records[q.id], cfg)
        trace.write_question(q.id, "votes.json", {
            "runs": [
                {
                    "repetition": r.repetition,
                    "answer": r.answer.to_dict() if r.answer else None,
                    "failure": r.failure,
                }
                for r in all_records[q.id]
            ],
            "final": finals[q.id].to_dict() if finals[q.id] else None,
        })
    return finals, all_records


@dataclass
class ScoreReport:
    overall_accuracy: float
    overall_count: int
    per_type: dict[str, tuple[float, int]]
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overall": {"accuracy": self.overall_accuracy, "count": self.overall_count},
            "per_type": {
                k: {"accuracy": acc, "count": n} for k, (acc, n) in self.per_type.items()
            },
            "skipped": self.skipped,
        }

    def to_text(self) -> str:
        headers = ["", "Total"] + list(self.per_type.keys())
        score_row = ["Score", f"{self.overall_accuracy:.2f}"] + [
            f"{acc:.2f}" for acc, _ in self.per_type.values()
        ]
        size_row = ["Size", str(self.overall_count)] + [
            str(n) for _, n in self.per_type.values()
        ]
        widths = [max(len(r[i]) for r in (headers, score_row, size_row))
                  for i in range(len(headers))]
        lines = []
        for row in (headers, score_row, size_row):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return "\n".join(lines)


def score(predictions: list[tuple[Question, Optional[Answer]]],
          cfg: CompareConfig = CompareConfig()) -> ScoreReport:
    """Accuracy overall and per answer type; abstains count as wrong,
    questions without gold are excluded with a warning."""
    totals: dict[str, list[int]] = {}
    correct_all = 0
    count_all = 0
    skipped = []
    for q, pred in predictions:
        if q.gold is None:
            skipped.append(q.id)
            continue
        ok = pred is not None and compare_answers(pred, q.gold, cfg)
        count_all += 1
        correct_all += int(ok)
        bucket = totals.setdefault(q.answer_type.value, [0, 0])
        bucket[0] += int(ok)
        bucket[1] += 1
    per_type = {
        at.value: (totals[at.value][0] / totals[at.value][1], totals[at.value][1])
        for at in AnswerType if at.value in totals
    }
    overall = correct_all / count_all if count_all else 0.0
    return ScoreReport(overall, count_all, per_type, skipped)


def ensemble_curve(records_by_question: dict[str, list[RunRecord]],
                   questions: list[Question], max_n: int,
                   cfg: EnsembleConfig = EnsembleConfig(),
                   compare_cfg: CompareConfig = CompareConfig()
                   ) -> list[tuple[int, float]]:
    """Accuracy when voting over only the first n repetitions, for
    n = 1..max_n."""
    by_id = {q.id: q for q in questions}
    available = max(
        (len({r.repetition for r in recs}) for recs in records_by_question.values()),
        default=0,
    )
    if max_n > available:
        max_n = available
    points = []
    for n in range(1, max_n + 1):
        preds = []
        for qid, recs in records_by_question.items():
            subset = [r for r in recs if r.repetition < n]
            preds.append((by_id[qid], vote(subset, cfg)))
        points.append((n, score(preds, compare_cfg).overall_accuracy))
    return points


def load_questions(path: str) -> list[Question]:
    """Questions JSONL: {id, table_id, question, answer_type, answer}."""
    questions = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            at = AnswerType(obj["answer_type"])
            gold = None
            if "answer" in obj and obj["answer"] is not None:
                gold = Answer.from_dict({"type": at.value, "value": obj["answer"]})
            questions.append(Question(
                id=str(obj["id"]),
                table_id=str(obj["table_id"]),
                text=obj["question"],
                answer_type=at,
                gold=gold,
            ))
    return questions
