"""Per-attempt correctness judgments and the adjudication ledger."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from ..corpus import BugCase, BugKind, ReasonCategory
from ..errors import CheckerError, WrongKind
from ..verdicts import Verdict, VerdictDecision
from .mechanics import MechanicsResult, check_mechanics
from .static import CheckerConfig, CompileResult, check_static


class OutcomeStatus(str, Enum):
    DECIDED = "decided"
    PENDING_ADJUDICATION = "pending_adjudication"


class FailureReason(str, Enum):
    WRONG_DECISION = "wrong_decision"
    BAD_EXPLANATION = "bad_explanation"
    OUTPUT_NOT_COMPILING = "output_not_compiling"
    MECHANICS_VIOLATED = "mechanics_violated"
    UNPARSEABLE_OUTPUT = "unparseable_output"
    NONE = "none"


AttemptKey = tuple  # (case_id, backend_name, attempt_index, temperature)


def _temp_key(t) -> str | None:
    return None if t is None else format(float(t), "g")


@dataclass(frozen=True)
class Adjudication:
    case_id: str
    backend_name: str
    attempt_index: int
    explanation_correct: bool
    notes: str = ""
    reviewer: str = ""
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    temperature: float | None = None  # narrows the key when a run has several temperatures

    def key(self) -> AttemptKey:
        return (self.case_id, self.backend_name, self.attempt_index, _temp_key(self.temperature))

    def matches(self, case_id, backend_name, attempt_index, temperature) -> bool:
        if (self.case_id, self.backend_name, self.attempt_index) != (case_id, backend_name, attempt_index):
            return False
        return self.temperature is None or _temp_key(self.temperature) == _temp_key(temperature)

    def to_dict(self) -> dict:
        d = {
            "case_id": self.case_id,
            "backend_name": self.backend_name,
            "attempt_index": self.attempt_index,
            "explanation_correct": self.explanation_correct,
            "notes": self.notes,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }
        if self.temperature is not None:
            d["temperature"] = self.temperature
        return d

    @classmethod
    def from_dict(cls, d) -> "Adjudication":
        return cls(d["case_id"], d["backend_name"], int(d["attempt_index"]), bool(d["explanation_correct"]),
                   d.get("notes", ""), d.get("reviewer", ""), d.get("timestamp", ""), d.get("temperature"))


@dataclass(frozen=True)
class Evidence:
    decision: VerdictDecision
    failure_reason: FailureReason = FailureReason.NONE
    compile: CompileResult | None = None
    mechanics: MechanicsResult | None = None
    adjudication: Adjudication | None = None
    diagnostic: str = ""

    def to_dict(self, timings: bool = True) -> dict:
        compile_ = None
        if self.compile is not None:
            compile_ = self.compile.to_dict()
            if not timings:
                compile_.pop("duration")
        return {
            "decision": self.decision.value,
            "failure_reason": self.failure_reason.value,
            "compile": compile_,
            "mechanics": None if self.mechanics is None else self.mechanics.to_dict(),
            "adjudication": None if self.adjudication is None else self.adjudication.to_dict(),
            "diagnostic": self.diagnostic,
        }

    @classmethod
    def from_dict(cls, d) -> "Evidence":
        return cls(
            VerdictDecision(d["decision"]),
            FailureReason(d["failure_reason"]),
            None if d.get("compile") is None else CompileResult.from_dict(d["compile"]),
            None if d.get("mechanics") is None else MechanicsResult.from_dict(d["mechanics"]),
            None if d.get("adjudication") is None else Adjudication.from_dict(d["adjudication"]),
            d.get("diagnostic", ""),
        )


@dataclass(frozen=True)
class CaseOutcome:
    case_id: str
    backend_name: str
    attempt_index: int
    correct: bool
    status: OutcomeStatus
    evidence: Evidence
    temperature: float | None = None

    def __post_init__(self):
        if self.status is OutcomeStatus.DECIDED:
            if self.correct != (self.evidence.failure_reason is FailureReason.NONE):
                raise ValueError("a decided outcome is correct exactly when it has no failure reason")
        elif self.correct:
            raise ValueError("a pending outcome cannot be correct")

    @property
    def pending(self) -> bool:
        return self.status is OutcomeStatus.PENDING_ADJUDICATION

    @property
    def failure_reason(self) -> FailureReason:
        return self.evidence.failure_reason

    def to_dict(self, timings: bool = True) -> dict:
        return {
            "case_id": self.case_id,
            "backend_name": self.backend_name,
            "attempt_index": self.attempt_index,
            "temperature": self.temperature,
            "correct": self.correct,
            "status": self.status.value,
            "evidence": self.evidence.to_dict(timings),
        }

    @classmethod
    def from_dict(cls, d) -> "CaseOutcome":
        return cls(d["case_id"], d["backend_name"], int(d["attempt_index"]), bool(d["correct"]),
                   OutcomeStatus(d["status"]), Evidence.from_dict(d["evidence"]), d.get("temperature"))


def _decided(case_id, backend, attempt, temperature, evidence: Evidence) -> CaseOutcome:
    correct = evidence.failure_reason is FailureReason.NONE
    return CaseOutcome(case_id, backend, attempt, correct, OutcomeStatus.DECIDED, evidence, temperature)


def _pending(case_id, backend, attempt, temperature, evidence: Evidence) -> CaseOutcome:
    return CaseOutcome(case_id, backend, attempt, False, OutcomeStatus.PENDING_ADJUDICATION, evidence, temperature)


# -------------------------------------------------------------------- judges


def judge_type1(case: BugCase, verdict: Verdict, adjudication: Adjudication | None = None,
                backend_name: str = "", attempt_index: int = 1, temperature: float | None = None) -> CaseOutcome:
    """Type I: the expected answer is NO with the right failure mode.

    A NO stays pending until a reviewer has checked the explanation; the
    reviewer decides whether the stated failure mode matches the ground
    truth category.
    """
    if not case.is_type1:
        raise WrongKind(f"{case.id} is not a Type I case")
    args = (case.id, backend_name, attempt_index, temperature)
    d = verdict.decision
    if d is VerdictDecision.UNPARSEABLE:
        return _decided(*args, Evidence(d, FailureReason.UNPARSEABLE_OUTPUT))
    if d is VerdictDecision.YES:
        return _decided(*args, Evidence(d, FailureReason.WRONG_DECISION))
    if adjudication is None:
        return _pending(*args, Evidence(d))
    reason = FailureReason.NONE if adjudication.explanation_correct else FailureReason.BAD_EXPLANATION
    return _decided(*args, Evidence(d, reason, adjudication=adjudication))


def judge_type2(case: BugCase, verdict: Verdict, workspace, checkers: CheckerConfig | None = None,
                backend_name: str = "", attempt_index: int = 1, temperature: float | None = None) -> CaseOutcome:
    """Type II: the expected answer is YES plus a program that compiles and
    follows the refactoring's mechanics."""
    if case.bug_kind is not BugKind.TYPE2_BLOCKED_VALID:
        raise WrongKind(f"{case.id} is not a Type II case")
    args = (case.id, backend_name, attempt_index, temperature)
    d = verdict.decision
    if d is VerdictDecision.UNPARSEABLE:
        return _decided(*args, Evidence(d, FailureReason.UNPARSEABLE_OUTPUT))
    if d is VerdictDecision.NO:
        return _decided(*args, Evidence(d, FailureReason.WRONG_DECISION))
    if not verdict.extracted_units:
        return _decided(*args, Evidence(d, FailureReason.UNPARSEABLE_OUTPUT))
    try:
        compiled = check_static(case.language, verdict.extracted_units, workspace, checkers)
    except CheckerError as exc:
        return _pending(*args, Evidence(d, diagnostic=str(exc)))
    if not compiled.ok:
        return _decided(*args, Evidence(d, FailureReason.OUTPUT_NOT_COMPILING, compile=compiled))
    mech = check_mechanics(case, verdict.extracted_units)
    reason = FailureReason.NONE if mech.ok else FailureReason.MECHANICS_VIOLATED
    return _decided(*args, Evidence(d, reason, compile=compiled, mechanics=mech))


def apply_adjudication(case: BugCase, outcome: CaseOutcome, adjudication: Adjudication | None) -> CaseOutcome:
    """Re-judge a persisted Type I outcome with a (possibly newer) review."""
    if not case.is_type1 or outcome.evidence.decision is not VerdictDecision.NO:
        return outcome
    if adjudication is None:
        return _pending(outcome.case_id, outcome.backend_name, outcome.attempt_index, outcome.temperature,
                        replace(outcome.evidence, failure_reason=FailureReason.NONE, adjudication=None))
    reason = FailureReason.NONE if adjudication.explanation_correct else FailureReason.BAD_EXPLANATION
    return _decided(outcome.case_id, outcome.backend_name, outcome.attempt_index, outcome.temperature,
                    replace(outcome.evidence, failure_reason=reason, adjudication=adjudication))


def needs_review(case: BugCase, outcome: CaseOutcome) -> bool:
    return case.is_type1 and outcome.evidence.decision is VerdictDecision.NO


# ------------------------------------------------------------ pre-labelling

CUES = {
    ReasonCategory.COMPILE_ERROR: (
        "does not compile", "doesn't compile", "not compile", "fail to compile", "fails to compile",
        "compilation error", "compile error", "compile-time", "compiler error", "syntax error",
        "cannot find symbol", "invalid syntax", "type mismatch", "undefined",
    ),
    ReasonCategory.RUNTIME_ERROR: (
        "runtime error", "run-time", "at runtime", "exception", "crash", "attributeerror",
        "nameerror", "typeerror", "nullpointer", "stack overflow", "infinite recursion",
    ),
    ReasonCategory.BEHAVIOR_CHANGE: (
        "behavior", "behaviour", "output", "different result", "prints", "semantics",
        "observable", "returns a different",
    ),
}


@dataclass(frozen=True)
class Suggestion:
    label: bool | None  # None means no cue matched either way
    matched: tuple[str, ...] = ()


def suggest_label(case: BugCase, verdict: Verdict) -> Suggestion:
    """Keyword pre-label for reviewers. Never finalizes an outcome."""
    text = verdict.body.lower()
    expected = case.ground_truth_reason.category
    hits = tuple(c for c in CUES.get(expected, ()) if c in text)
    if hits:
        return Suggestion(True, hits)
    others = tuple(c for cat, cues in CUES.items() if cat is not expected for c in cues if c in text)
    return Suggestion(False if others else None, others)


# ------------------------------------------------------------------- ledger


class AdjudicationLedger:
    """Append-only JSON-lines file. Later entries for the same attempt win."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def __iter__(self) -> Iterator[Adjudication]:
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield Adjudication.from_dict(json.loads(line))

    def append(self, adj: Adjudication) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(adj.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def latest_for(self, case_id, backend_name, attempt_index, temperature=None,
                   entries: Iterable[Adjudication] | None = None) -> Adjudication | None:
        found = None
        for adj in self if entries is None else entries:
            if adj.matches(case_id, backend_name, attempt_index, temperature):
                found = adj
        return found
