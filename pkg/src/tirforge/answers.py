"""Final-answer equivalence for scoring and data filtering.

Comparison is deliberately lightweight: string equality after LaTeX-ish
normalization, exact rational equality, then a relative numeric tolerance.
No computer-algebra simplification — "pi" and "3.14159" compare unequal,
matching common benchmark grading practice.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class EquivConfig:
    rel_tol: float = 1e-6
    normalize_latex: bool = True
    integer_mode: bool = False

    def __post_init__(self) -> None:
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


_BOXED = re.compile(r"\\boxed\s*{")
_FRAC = re.compile(r"\\[dt]?frac\s*{([^{}]*)}\s*{([^{}]*)}")
_SQRT = re.compile(r"\\sqrt\s*{([^{}]*)}")
_SUP_BRACES = re.compile(r"\^\s*{([^{}]*)}")
_THOUSANDS = re.compile(r"(?<=\d)[,](?=\d{3}(\D|$))")
_BRACED_COMMA = re.compile(r"\{,\}")
_TEXT_CMD = re.compile(r"\\text(?:rm|bf|it)?\s*{([^{}]*)}")
_SPACING_CMDS = re.compile(r"\\[,;!:]|\\left|\\right|\\big[lr]?|\\Big[lr]?")
_NUMBER = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def _strip_boxed(text: str) -> str:
    m = _BOXED.search(text)
    if m is None:
        return text
    depth = 1
    j = m.end()
    while j < len(text) and depth:
        if text[j] == "{":
            depth += 1
        elif text[j] == "}":
            depth -= 1
        j += 1
    inner = text[m.end(): j - 1] if depth == 0 else text[m.end():]
    return text[: m.start()] + inner + text[j:]


def normalize_answer(text: str, latex: bool = True) -> str:
    """Canonicalize an answer string for comparison.

    Strips boxed wrappers, math-mode dollars, whitespace, trailing periods
    and thousands separators; lowercases; rewrites common LaTeX forms
    (\\frac{a}{b} -> a/b, \\sqrt{x} -> sqrt(x), \\pi -> pi, ^{n} -> ^n).
    Idempotent: normalizing a normalized answer is a no-op.
    """
    s = text.strip()
    while _BOXED.search(s):
        s = _strip_boxed(s)
    s = s.strip().strip("$").strip()
    if latex:
        s = _TEXT_CMD.sub(r"\1", s)
        s = _SPACING_CMDS.sub("", s)
        # Nested fractions resolve innermost-first across passes.
        prev = None
        while prev != s:
            prev = s
            s = _FRAC.sub(r"\1/\2", s)
            s = _SQRT.sub(r"sqrt(\1)", s)
        s = _SUP_BRACES.sub(r"^\1", s)
        s = s.replace("\\pi", "pi")
        s = s.replace("\\cdot", "*")
        s = s.replace("\\times", "*")
    s = _BRACED_COMMA.sub("", s)
    s = _THOUSANDS.sub("", s)
    s = s.rstrip(".")
    s = " ".join(s.split())
    return s.lower()


def _as_fraction(s: str) -> Fraction | None:
    s = s.replace(" ", "")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        return None


def _as_decimal(s: str) -> float | None:
    s = s.replace(" ", "")
    if not _NUMBER.match(s):
        return None
    try:
        return float(s)
    except ValueError:
        return None


def answers_equivalent(pred: str, gold: str, cfg: EquivConfig | None = None) -> bool:
    """Decide whether a predicted answer matches the gold answer.

    True when, after normalization, the strings are equal, or both parse
    as exact rationals and are equal, or both parse as decimals within
    rel_tol relative to max(1, |gold|).
    """
    cfg = cfg or EquivConfig()
    p = normalize_answer(pred, latex=cfg.normalize_latex)
    g = normalize_answer(gold, latex=cfg.normalize_latex)
    if p == g:
        return True
    if not p or not g:
        return False

    fp, fg = _as_fraction(p), _as_fraction(g)
    if fp is not None and fg is not None:
        if cfg.integer_mode:
            return round(fp) == round(fg)
        if fp == fg:
            return True

    dp, dg = _as_decimal(p), _as_decimal(g)
    if dp is not None and dg is not None:
        if cfg.integer_mode:
            return round(dp) == round(dg)
        # max over both sides keeps the check symmetric on knife edges.
        return abs(dp - dg) <= cfg.rel_tol * max(1.0, abs(dg), abs(dp))
    return False
