"""tirforge: pattern-aware tool-integrated-reasoning data pipeline and eval harness."""

__version__ = "0.1.0"

from .schema import (
    EvalOutcome,
    ExecStatus,
    ExecutionResult,
    Metrics,
    PatternLabel,
    PreferencePair,
    Problem,
    SFTExample,
    Solution,
    TeacherRecord,
    validate_record,
)

__all__ = [
    "__version__",
    "EvalOutcome",
    "ExecStatus",
    "ExecutionResult",
    "Metrics",
    "PatternLabel",
    "PreferencePair",
    "Problem",
    "SFTExample",
    "Solution",
    "TeacherRecord",
    "validate_record",
]
