"""Training-data emission: transcripts, SFT rows, preference pairs, split.

Every solution is rendered into one fixed transcript layout (reasoning,
code block, outputs, final answer) so downstream parsing and execution
stay trivial. Rows carry the student-facing prompt, which deliberately
never mentions that usage patterns exist — pattern choice is exactly what
the student model is supposed to internalize.
"""

from __future__ import annotations

import enum
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, TypeVar

from .answers import EquivConfig, answers_equivalent
from .sandbox import ExecLimits, execute_code
from .schema import (
    PatternLabel,
    PreferencePair,
    Problem,
    SFTExample,
    Solution,
    TeacherRecord,
)

STUDENT_PROMPT_PREFIX = (
    "Use a python interpreter as a tool to solve the following math problem."
)


class UnknownProblemId(KeyError):
    def __init__(self, problem_id: str):
        super().__init__(problem_id)
        self.problem_id = problem_id

    def __str__(self) -> str:
        return f"record references unknown problem id {self.problem_id!r}"


class FilterLevel(enum.Enum):
    NONE = "none"
    EXEC_OK = "exec_ok"
    EXEC_AND_CORRECT = "exec_and_correct"


class FilterAppliesTo(enum.Enum):
    CHOSEN_ONLY = "chosen_only"
    BOTH = "both"


@dataclass(frozen=True)
class FilterPolicy:
    """Which solutions must execute (and be correct) for a record to be kept.

    The default keeps counter solutions unchecked: counters are allowed to
    fail, and dropping them would destroy the preference signal.
    """

    level: FilterLevel = FilterLevel.EXEC_OK
    applies_to: FilterAppliesTo = FilterAppliesTo.CHOSEN_ONLY

    def as_dict(self) -> dict:
        return {"level": self.level.value, "applies_to": self.applies_to.value}


def tir_prompt(statement: str) -> str:
    """Single-pattern-agnostic prompt used for SFT rows, pairs, and eval.

    Deliberately never mentions that usage patterns exist: choosing one is
    what the trained model has to internalize.
    """
    return f"{STUDENT_PROMPT_PREFIX}\n\n{statement}\n"


def student_prompt(problem: Problem) -> str:
    return tir_prompt(problem.statement)


def render_solution(problem: Problem, solution: Solution) -> str:
    """Render a solution into the fixed transcript layout, deterministically."""
    outputs = "\n".join(solution.claimed_outputs)
    return (
        f"{solution.reasoning.strip()}\n\n"
        f"```python\n{solution.code.rstrip(chr(10))}\n```\n\n"
        f"Outputs:\n{outputs}\n\n"
        f"Final answer: {solution.final_answer.strip()}\n"
    )


def _passes_filter(
    record: TeacherRecord,
    problem: Problem,
    policy: FilterPolicy,
    limits: ExecLimits,
    equiv: EquivConfig,
    interpreter: str,
) -> bool:
    if policy.level is FilterLevel.NONE:
        return True
    sides = [record.chosen]
    if policy.applies_to is FilterAppliesTo.BOTH:
        sides.append(record.counter)
    for sol in sides:
        result = execute_code(sol.code, limits, interpreter)
        if not result.ok:
            return False
        if policy.level is FilterLevel.EXEC_AND_CORRECT and problem.gold_answer:
            if not answers_equivalent(sol.final_answer, problem.gold_answer, equiv):
                return False
    return True


def _keep_mask(
    records: Sequence[TeacherRecord],
    problems: Mapping[str, Problem],
    policy: FilterPolicy,
    limits: ExecLimits | None,
    equiv: EquivConfig | None,
    interpreter: str,
    workers: int,
) -> list[bool]:
    limits = limits or ExecLimits()
    equiv = equiv or EquivConfig()
    for record in records:
        if record.problem_id not in problems:
            raise UnknownProblemId(record.problem_id)
    if policy.level is FilterLevel.NONE:
        return [True] * len(records)

    def check(record: TeacherRecord) -> bool:
        return _passes_filter(
            record, problems[record.problem_id], policy, limits, equiv, interpreter
        )

    if len(records) <= 1 or workers <= 1:
        return [check(r) for r in records]
    with ThreadPoolExecutor(max_workers=min(workers, len(records))) as pool:
        return list(pool.map(check, records))


def build_sft_dataset(
    records: Sequence[TeacherRecord],
    problems: Mapping[str, Problem],
    policy: FilterPolicy | None = None,
    limits: ExecLimits | None = None,
    equiv: EquivConfig | None = None,
    interpreter: str = "python3",
    workers: int = 4,
) -> list[SFTExample]:
    """Emit two SFT examples (chosen + counter) per record that passes the filter."""
    policy = policy or FilterPolicy()
    kept = _keep_mask(records, problems, policy, limits, equiv, interpreter, workers)
    examples: list[SFTExample] = []
    for record, keep in zip(records, kept):
        if not keep:
            continue
        problem = problems[record.problem_id]
        prompt = student_prompt(problem)
        examples.append(
            SFTExample(
                id=f"{record.problem_id}/chosen",
                prompt=prompt,
                target=render_solution(problem, record.chosen),
                pattern=record.chosen_pattern,
            )
        )
        examples.append(
            SFTExample(
                id=f"{record.problem_id}/counter",
                prompt=prompt,
                target=render_solution(problem, record.counter),
                pattern=record.chosen_pattern.complement(),
            )
        )
    return examples


def build_dpo_pairs(
    records: Sequence[TeacherRecord],
    problems: Mapping[str, Problem],
    policy: FilterPolicy | None = None,
    limits: ExecLimits | None = None,
    equiv: EquivConfig | None = None,
    interpreter: str = "python3",
    workers: int = 4,
) -> list[PreferencePair]:
    """Emit one preference pair per kept record; winner is the chosen solution."""
    policy = policy or FilterPolicy()
    kept = _keep_mask(records, problems, policy, limits, equiv, interpreter, workers)
    pairs: list[PreferencePair] = []
    for record, keep in zip(records, kept):
        if not keep:
            continue
        problem = problems[record.problem_id]
        pairs.append(
            PreferencePair(
                id=record.problem_id,
                prompt=student_prompt(problem),
                winner=render_solution(problem, record.chosen),
                loser=render_solution(problem, record.counter),
                winner_pattern=record.chosen_pattern,
            )
        )
    return pairs


T = TypeVar("T")


def sft_problem_id(example: SFTExample) -> str:
    return example.id.rsplit("/", 1)[0]


def pair_problem_id(pair: PreferencePair) -> str:
    return pair.id


def split_train_val(
    examples: Sequence[T],
    ratio: float,
    seed: int | None = None,
    group_key: Callable[[T], str] | None = None,
) -> tuple[list[T], list[T]]:
    """Split examples into train/val, keeping whole problems on one side.

    Without a seed the original order is preserved and the first groups go
    to train until it holds at least ceil(ratio * n) examples; with a seed
    the group order is shuffled deterministically first.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    if group_key is None:
        group_key = _default_group_key
    items = list(examples)
    if not items:
        return [], []

    order: list[str] = []
    groups: dict[str, list[T]] = {}
    for item in items:
        key = group_key(item)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(item)
    if seed is not None:
        random.Random(seed).shuffle(order)

    target = math.ceil(ratio * len(items))
    train: list[T] = []
    val: list[T] = []
    for key in order:
        bucket = train if len(train) < target else val
        bucket.extend(groups[key])
    return train, val


def _default_group_key(item) -> str:
    if isinstance(item, SFTExample):
        return sft_problem_id(item)
    if isinstance(item, PreferencePair):
        return pair_problem_id(item)
    raise TypeError(f"cannot derive a problem id from {type(item).__name__}; pass group_key")
