"""Benchmark loading, per-completion scoring, and metric aggregation.

Three metrics are tracked per benchmark: the fraction of problems whose
single greedy completion answers correctly (Pass@1), the fraction whose
completion contains code that runs cleanly (Code@1), and the fraction
where both hold at once (Code+Pass@1). "Contains executable code" is
operationalized as first-code-block-executes-cleanly; the raw booleans are
kept per problem so stricter readings can be recomputed later.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .answers import EquivConfig, answers_equivalent
from .parsing import parse_completion
from .sandbox import ExecLimits, execute_code
from .schema import EvalOutcome, Metrics, PatternLabel, read_jsonl


class EvalError(Exception):
    pass


class MalformedRow(EvalError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class DuplicateId(EvalError):
    pass


class LengthMismatch(EvalError):
    pass


class EmptyInput(EvalError):
    pass


@dataclass(frozen=True)
class EvalProblem:
    id: str
    problem: str
    answer: str
    benchmark: str


@dataclass(frozen=True)
class Report:
    model: str
    timestamp: str
    config_hash: str
    rows: tuple[tuple[str, Metrics], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))


def load_benchmark(path: str | Path) -> list[EvalProblem]:
    """Read benchmark JSONL rows {"id","problem","answer"}; ids must be unique."""
    path = Path(path)
    benchmark = path.stem
    problems: list[EvalProblem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(line_no, f"invalid JSON ({exc.msg})") from exc
            for key in ("id", "problem", "answer"):
                if key not in row:
                    raise MalformedRow(line_no, f"missing field {key!r}")
            if not str(row["answer"]).strip():
                raise MalformedRow(line_no, "empty answer")
            pid = str(row["id"])
            if pid in seen:
                raise DuplicateId(f"duplicate problem id {pid!r} at line {line_no}")
            seen.add(pid)
            problems.append(
                EvalProblem(
                    id=pid,
                    problem=str(row["problem"]),
                    answer=str(row["answer"]),
                    benchmark=benchmark,
                )
            )
    return problems


def evaluate_completion(
    problem: EvalProblem,
    completion: str,
    limits: ExecLimits | None = None,
    equiv: EquivConfig | None = None,
    interpreter: str = "python3",
) -> EvalOutcome:
    """Score one completion: code presence, clean execution, answer match."""
    parsed = parse_completion(completion)
    has_code = len(parsed.code_blocks) > 0
    code_executed = False
    if has_code:
        result = execute_code(parsed.code_blocks[0], limits, interpreter)
        code_executed = result.ok
    answer_correct = parsed.final_answer is not None and answers_equivalent(
        parsed.final_answer, problem.answer, equiv
    )
    return EvalOutcome(
        problem_id=problem.id,
        has_code=has_code,
        code_executed=code_executed,
        answer_correct=answer_correct,
    )


def compute_metrics(outcomes: Sequence[EvalOutcome]) -> Metrics:
    """Aggregate outcome booleans into the three @1 fractions."""
    if not outcomes:
        raise EmptyInput("cannot compute metrics over zero outcomes")
    n = len(outcomes)
    return Metrics(
        n=n,
        pass1=sum(o.answer_correct for o in outcomes) / n,
        code1=sum(o.code_executed for o in outcomes) / n,
        codepass1=sum(o.code_executed and o.answer_correct for o in outcomes) / n,
    )


def agreement_rate(a: Sequence[PatternLabel], b: Sequence[PatternLabel]) -> float:
    """Fraction of positions where the two label lists agree."""
    if len(a) != len(b):
        raise LengthMismatch(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise EmptyInput("cannot compute agreement over zero labels")
    return sum(x == y for x, y in zip(a, b)) / len(a)


def load_labels(path: str | Path) -> list[PatternLabel]:
    """Read pattern labels from JSONL rows {"id","pattern"} in file order."""
    return [PatternLabel(str(row["pattern"]).strip().upper()) for row in read_jsonl(path)]


_COLUMNS = ("Code@1", "Code+Pass@1", "Pass@1")


def _metric_cells(m: Metrics) -> tuple[str, str, str]:
    return (f"{m.code1:.1%}", f"{m.codepass1:.1%}", f"{m.pass1:.1%}")


def render_report(report: Report) -> tuple[str, str]:
    """Render one evaluation run as (markdown table, JSON twin).

    Benchmarks become column groups with Code@1 / Code+Pass@1 / Pass@1
    sub-columns; the JSON twin carries the same numbers machine-readably.
    """
    if not report.rows:
        raise EmptyInput("report has no metrics rows")
    rows = sorted(report.rows, key=lambda r: r[0])

    header = ["Model"]
    for benchmark, _ in rows:
        header.extend(f"{benchmark} {col}" for col in _COLUMNS)
    cells = [report.model]
    for _, metrics in rows:
        cells.extend(_metric_cells(metrics))
    md_lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
        "| " + " | ".join(cells) + " |",
    ]
    markdown = "\n".join(md_lines) + "\n"

    twin = {
        "model": report.model,
        "timestamp": report.timestamp,
        "config_hash": report.config_hash,
        "benchmarks": [
            {
                "benchmark": benchmark,
                "n": m.n,
                "pass1": m.pass1,
                "code1": m.code1,
                "codepass1": m.codepass1,
            }
            for benchmark, m in rows
        ],
    }
    return markdown, json.dumps(twin, indent=2, ensure_ascii=False) + "\n"


def report_from_json(text: str) -> Report:
    """Inverse of render_report's JSON twin."""
    data = json.loads(text)
    rows = tuple(
        (
            row["benchmark"],
            Metrics(n=row["n"], pass1=row["pass1"], code1=row["code1"], codepass1=row["codepass1"]),
        )
        for row in data["benchmarks"]
    )
    return Report(
        model=data["model"],
        timestamp=data["timestamp"],
        config_hash=data["config_hash"],
        rows=rows,
    )
