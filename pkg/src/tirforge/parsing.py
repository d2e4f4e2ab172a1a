"""Parsers for teacher replies and student completions.

Teacher replies are expected to be a single JSON object, but models wrap
JSON in markdown fences or surrounding prose often enough that we repair
those two cases. Repair stops there: no key-level guessing, since silently
"fixing" keys would corrupt training data.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .schema import PatternLabel, Solution, TeacherRecord, validate_record


class ParseError(Exception):
    """Base class for teacher/completion parsing failures."""


class NoJsonFound(ParseError):
    pass


class MissingKey(ParseError):
    def __init__(self, key: str):
        super().__init__(f"missing key: {key}")
        self.key = key


class SchemaViolation(ParseError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class BadPattern(ParseError):
    def __init__(self, value: object):
        super().__init__(f"pattern label must be 'A' or 'B', got {value!r}")
        self.value = value


@dataclass(frozen=True)
class ParsedCompletion:
    """Structure pulled out of a raw model completion.

    code_blocks may be empty (the model may answer without code);
    final_answer is None only when no answer marker was found.
    """

    reasoning: str
    code_blocks: tuple[str, ...]
    claimed_outputs: str
    final_answer: str | None


_FENCE_OPEN = re.compile(r"^\s*```[^\n`]*\n", re.MULTILINE)
_CODE_BLOCK = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_FINAL_ANSWER = re.compile(r"final\s+answer\s*[:\-]?\s*", re.IGNORECASE)
_LIST_MARKERS = (
    re.compile(r"^\s*[-*+]\s+"),
    re.compile(r"^\s*\d+[.)]\s+"),
    re.compile(r"^\s*\(\d+\)\s+"),
)


def extract_json_payload(raw: str) -> str:
    """Return the largest balanced JSON object embedded in raw text.

    Strips markdown fences and leading/trailing prose; identity when the
    input is already pure JSON. Raises NoJsonFound when no syntactically
    valid object can be located.
    """
    text = raw.strip()
    if text.startswith("{") and text.endswith("}"):
        try:
            json.loads(text)
            return text
        except json.JSONDecodeError:
            pass

    # Peel one fence layer if present, then rescan.
    m = _FENCE_OPEN.search(text)
    if m is not None:
        close = text.find("```", m.end())
        if close != -1:
            inner = text[m.end():close].strip()
            if inner.startswith("{"):
                try:
                    json.loads(inner)
                    return inner
                except json.JSONDecodeError:
                    pass

    best = ""
    for candidate in _balanced_objects(text):
        if len(candidate) > len(best):
            try:
                json.loads(candidate)
            except json.JSONDecodeError:
                continue
            best = candidate
    if not best:
        raise NoJsonFound(f"no JSON object found in {len(raw)}-char response")
    return best


def _balanced_objects(text: str):
    """Yield every top-level brace-balanced {...} span, string-aware."""
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    yield text[start : i + 1]


def _solution_from_json(obj: dict, where: str) -> Solution:
    for key in ("reasoning", "code_blocks", "outputs", "final_answer"):
        if key not in obj:
            raise MissingKey(f"{where}.{key}")
    blocks = obj["code_blocks"]
    if not isinstance(blocks, list) or len(blocks) != 1:
        raise SchemaViolation(
            [f"{where}.code_blocks must hold exactly one code block, got {len(blocks) if isinstance(blocks, list) else type(blocks).__name__}"]
        )
    outputs = obj["outputs"]
    if not isinstance(outputs, list):
        raise SchemaViolation([f"{where}.outputs must be a list of stdout lines"])
    return Solution(
        reasoning=str(obj["reasoning"]),
        code=str(blocks[0]).rstrip("\n"),
        claimed_outputs=tuple(str(line) for line in outputs),
        final_answer=str(obj["final_answer"]),
    )


def parse_teacher_record(json_text: str, problem_id: str) -> TeacherRecord:
    """Turn a teacher JSON payload into a validated TeacherRecord.

    The payload must carry problem / chosen_pattern / chosen_solution /
    counter_solution, each solution with exactly one code block. Any
    violation reported by validate_record is raised, never returned.
    """
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise NoJsonFound(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise NoJsonFound("payload is not a JSON object")

    for key in ("problem", "chosen_pattern", "chosen_solution", "counter_solution"):
        if key not in obj:
            raise MissingKey(key)

    label = obj["chosen_pattern"]
    if not isinstance(label, str) or label.strip().upper() not in ("A", "B"):
        raise BadPattern(label)

    record = TeacherRecord(
        problem_id=problem_id,
        chosen_pattern=PatternLabel(label.strip().upper()),
        chosen=_solution_from_json(obj["chosen_solution"], "chosen_solution"),
        counter=_solution_from_json(obj["counter_solution"], "counter_solution"),
        raw=json_text,
    )
    violations = validate_record(record)
    if violations:
        raise SchemaViolation(violations)
    return record


def parse_completion(text: str) -> ParsedCompletion:
    """Split a completion into reasoning, code blocks, outputs, final answer.

    The final answer is the last boxed expression when present, else the
    text following the last case-insensitive "final answer" marker, else
    None. Reasoning is everything before the first code block.
    """
    blocks = [_strip_trailing_newline(m.group(1)) for m in _CODE_BLOCK.finditer(text)]

    first = _CODE_BLOCK.search(text)
    reasoning = text[: first.start()].strip() if first else text.strip()

    final_answer: str | None = None
    answer_start = len(text)
    boxed, boxed_start = _last_boxed(text)
    if boxed is not None:
        final_answer = boxed.strip()
        answer_start = boxed_start
    else:
        matches = list(_FINAL_ANSWER.finditer(text))
        if matches:
            m = matches[-1]
            final_answer = text[m.end():].strip()
            answer_start = m.start()

    if blocks:
        last = None
        for last in _CODE_BLOCK.finditer(text):
            pass
        tail = text[last.end(): answer_start]
        claimed_outputs = _strip_outputs_header(tail).strip()
    else:
        claimed_outputs = ""

    return ParsedCompletion(
        reasoning=reasoning,
        code_blocks=tuple(blocks),
        claimed_outputs=claimed_outputs,
        final_answer=final_answer,
    )


_OUTPUTS_HEADER = re.compile(r"^\s*outputs?\s*:\s*\n?", re.IGNORECASE)


def _strip_outputs_header(tail: str) -> str:
    return _OUTPUTS_HEADER.sub("", tail.lstrip("\n"), count=1)


def _strip_trailing_newline(block: str) -> str:
    return block[:-1] if block.endswith("\n") else block


def _last_boxed(text: str) -> tuple[str | None, int]:
    """Return the content of the last \\boxed{...}, brace-depth aware."""
    marker = "\\boxed"
    idx = text.rfind(marker)
    while idx != -1:
        scan = idx + len(marker)
        while scan < len(text) and text[scan].isspace():
            scan += 1
        if scan < len(text) and text[scan] == "{":
            depth = 1
            j = scan + 1
            while j < len(text):
                if text[j] == "{":
                    depth += 1
                elif text[j] == "}":
                    depth -= 1
                    if depth == 0:
                        return text[scan + 1 : j], idx
                j += 1
        idx = text.rfind(marker, 0, idx)
    return None, -1


def reasoning_style_warnings(reasoning: str) -> list[str]:
    """Flag list/numbering markers in a reasoning paragraph.

    The transcript schema wants one continuous paragraph; markers are
    reported as warnings only, since they do not affect executability.
    """
    warnings = []
    for lineno, line in enumerate(reasoning.splitlines(), start=1):
        for pat in _LIST_MARKERS:
            if pat.match(line):
                warnings.append(f"line {lineno}: list marker {line.strip()[:20]!r}")
                break
    return warnings
