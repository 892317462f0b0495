"""Independent checks on model output: compile oracle, refactoring
mechanics and the final per-attempt judgment."""

from .judge import (
    Adjudication,
    AdjudicationLedger,
    CaseOutcome,
    Evidence,
    FailureReason,
    OutcomeStatus,
    Suggestion,
    apply_adjudication,
    judge_type1,
    judge_type2,
    needs_review,
    suggest_label,
)
from .mechanics import Finding, MechanicsResult, check_mechanics, register_rule
from .static import CheckerConfig, CompileResult, Diagnostic, check_static, resolve_command

__all__ = [
    "Adjudication", "AdjudicationLedger", "CaseOutcome", "CheckerConfig", "CompileResult",
    "Diagnostic", "Evidence", "FailureReason", "Finding", "MechanicsResult", "OutcomeStatus",
    "Suggestion", "apply_adjudication", "check_mechanics", "check_static", "judge_type1",
    "judge_type2", "needs_review", "register_rule", "resolve_command", "suggest_label",
]
