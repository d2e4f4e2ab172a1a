"""Shared domain types, validation, and canonical JSONL (de)serialization.

Every type here is an immutable value object, safe to share across worker
threads. On-disk format is JSON-lines with fixed field names and field
order; unknown fields are tolerated on read and never written back.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator


class PatternLabel(enum.Enum):
    """Tool-usage pattern: A = algorithmic (full program), B = calculator."""

    A = "A"
    B = "B"

    @property
    def pattern_name(self) -> str:
        return "algorithmic" if self is PatternLabel.A else "calculator"

    def complement(self) -> "PatternLabel":
        return PatternLabel.B if self is PatternLabel.A else PatternLabel.A


@dataclass(frozen=True)
class Problem:
    """One math problem; the unit every pipeline operates on."""

    id: str
    statement: str
    gold_answer: str | None = None
    source: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be non-empty")
        if not self.statement:
            raise ValueError("problem statement must be non-empty")


@dataclass(frozen=True)
class Solution:
    """One reasoning paragraph, one code block, claimed stdout, final answer."""

    reasoning: str
    code: str
    claimed_outputs: tuple[str, ...]
    final_answer: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "claimed_outputs", tuple(self.claimed_outputs))


@dataclass(frozen=True)
class TeacherRecord:
    """Parsed teacher reply: chosen pattern plus chosen/counter solutions."""

    problem_id: str
    chosen_pattern: PatternLabel
    chosen: Solution
    counter: Solution
    raw: str = ""


@dataclass(frozen=True)
class SFTExample:
    id: str
    prompt: str
    target: str
    pattern: PatternLabel


@dataclass(frozen=True)
class PreferencePair:
    id: str
    prompt: str
    winner: str
    loser: str
    winner_pattern: PatternLabel

    def __post_init__(self) -> None:
        if self.winner == self.loser:
            raise ValueError("preference pair winner and loser must differ")


class ExecStatus(enum.Enum):
    OK = "ok"
    RUNTIME_ERROR = "runtime_error"
    TIMEOUT = "timeout"
    RESOURCE_LIMIT = "resource_limit"
    SPAWN_ERROR = "spawn_error"


@dataclass(frozen=True)
class ExecutionResult:
    status: ExecStatus
    stdout: str
    stderr: str
    wall_ms: int
    stdout_truncated: bool = False

    def __post_init__(self) -> None:
        if self.wall_ms < 0:
            raise ValueError("wall_ms must be non-negative")

    @property
    def ok(self) -> bool:
        return self.status is ExecStatus.OK


@dataclass(frozen=True)
class EvalOutcome:
    """Per-problem scoring booleans; code_executed implies has_code."""

    problem_id: str
    has_code: bool
    code_executed: bool
    answer_correct: bool

    def __post_init__(self) -> None:
        if self.code_executed and not self.has_code:
            raise ValueError("code_executed requires has_code")


@dataclass(frozen=True)
class Metrics:
    """Aggregate fractions; codepass1 can never exceed code1 or pass1."""

    n: int
    pass1: float
    code1: float
    codepass1: float

    def __post_init__(self) -> None:
        for name in ("pass1", "code1", "codepass1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.codepass1 > min(self.code1, self.pass1):
            raise ValueError("codepass1 cannot exceed min(code1, pass1)")


@dataclass(frozen=True)
class DPOConfig:
    """Preference-strength scale for the pairwise alignment loss."""

    beta: float = 0.1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be a positive finite real")


_WS_RUN = re.compile(r"\s+")


def _squash_ws(text: str) -> str:
    return _WS_RUN.sub(" ", text).strip()


def validate_record(record: TeacherRecord) -> list[str]:
    """Check a TeacherRecord against the construction constraints.

    Returns a list of human-readable violations; an empty list means the
    record is well formed. Duplication across the chosen/counter fields is
    checked as exact string equality after whitespace normalization.
    """
    violations: list[str] = []
    if not record.problem_id:
        violations.append("empty problem id")
    for sol in (record.chosen, record.counter):
        if not sol.code.strip():
            violations.append("empty code block")
        if not sol.reasoning.strip():
            violations.append("empty reasoning")
        if not sol.final_answer.strip():
            violations.append("empty final answer")
    if _squash_ws(record.chosen.reasoning) == _squash_ws(record.counter.reasoning):
        violations.append("duplicated reasoning")
    if _squash_ws(record.chosen.code) == _squash_ws(record.counter.code):
        violations.append("duplicated code")
    return violations


# ---------------------------------------------------------------------------
# Canonical JSON mapping. Field order below is the on-disk order.
# ---------------------------------------------------------------------------


def problem_to_dict(p: Problem) -> dict:
    return {
        "id": p.id,
        "statement": p.statement,
        "gold_answer": p.gold_answer,
        "source": p.source,
    }


def problem_from_dict(d: dict) -> Problem:
    return Problem(
        id=d["id"],
        statement=d["statement"],
        gold_answer=d.get("gold_answer"),
        source=d.get("source", ""),
    )


def solution_to_dict(s: Solution) -> dict:
    return {
        "reasoning": s.reasoning,
        "code": s.code,
        "claimed_outputs": list(s.claimed_outputs),
        "final_answer": s.final_answer,
    }


def solution_from_dict(d: dict) -> Solution:
    return Solution(
        reasoning=d["reasoning"],
        code=d["code"],
        claimed_outputs=tuple(d["claimed_outputs"]),
        final_answer=d["final_answer"],
    )


def record_to_dict(r: TeacherRecord) -> dict:
    return {
        "problem_id": r.problem_id,
        "chosen_pattern": r.chosen_pattern.value,
        "chosen": solution_to_dict(r.chosen),
        "counter": solution_to_dict(r.counter),
        "raw": r.raw,
    }


def record_from_dict(d: dict) -> TeacherRecord:
    return TeacherRecord(
        problem_id=d["problem_id"],
        chosen_pattern=PatternLabel(d["chosen_pattern"]),
        chosen=solution_from_dict(d["chosen"]),
        counter=solution_from_dict(d["counter"]),
        raw=d.get("raw", ""),
    )


def sft_example_to_dict(e: SFTExample) -> dict:
    return {
        "id": e.id,
        "prompt": e.prompt,
        "target": e.target,
        "pattern": e.pattern.value,
    }


def sft_example_from_dict(d: dict) -> SFTExample:
    return SFTExample(
        id=d["id"],
        prompt=d["prompt"],
        target=d["target"],
        pattern=PatternLabel(d["pattern"]),
    )


def pair_to_dict(p: PreferencePair) -> dict:
    return {
        "id": p.id,
        "prompt": p.prompt,
        "winner": p.winner,
        "loser": p.loser,
        "winner_pattern": p.winner_pattern.value,
    }


def pair_from_dict(d: dict) -> PreferencePair:
    return PreferencePair(
        id=d["id"],
        prompt=d["prompt"],
        winner=d["winner"],
        loser=d["loser"],
        winner_pattern=PatternLabel(d["winner_pattern"]),
    )


def dumps_line(obj: dict) -> str:
    """Serialize one JSONL row. Deterministic: fixed key order, no ASCII escaping."""
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    """Write rows to a JSONL file; returns the number of rows written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps_line(row))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield one dict per non-blank line. Unknown fields pass through untouched."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
