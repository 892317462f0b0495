"""pass@k, consistency@k, detection and explanation rates.

All percentages are exact ``Fraction`` values; :func:`fmt_pct` rounds them
half-up to one decimal for display only.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import BugCase
from .errors import DuplicateTemperature, KOutOfRange, MetricsError, PendingOutcomes
from .oracles.judge import CaseOutcome, FailureReason
from .verdicts import VerdictDecision

HUNDRED = Fraction(100)
DIMENSIONS = ("backend", "temperature", "cohort", "bug_type", "bug_kind", "language", "reason_category")


def fmt_pct(value: Fraction | None, places: int = 1) -> str:
    if value is None:
        return ""
    q = Decimal(1).scaleb(-places)
    return str((Decimal(value.numerator) / Decimal(value.denominator)).quantize(q, rounding=ROUND_HALF_UP))


def fmt_temperature(t) -> str:
    if t is None:
        return ""
    return format(Decimal(str(float(t))).quantize(Decimal("0.01")).normalize(), "f")


@dataclass(frozen=True)
class CorrectnessMatrix:
    """Per-case attempt correctness, each row in attempt_index order."""

    labels: tuple[str, ...]
    rows: tuple[tuple[bool, ...], ...]
    pending: int = 0

    def __post_init__(self):
        if len(self.labels) != len(self.rows):
            raise MetricsError("one row per label")
        if len({len(r) for r in self.rows}) > 1:
            raise MetricsError("every case needs the same number of attempts")
        if self.rows and not self.rows[0]:
            raise MetricsError("rows must hold at least one attempt")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def c(self, k: int | None = None) -> list[int]:
        k = self.k if k is None else k
        return [sum(r[:k]) for r in self.rows]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], labels: Sequence[str] | None = None) -> "CorrectnessMatrix":
        rows = tuple(tuple(bool(x) for x in r) for r in rows)
        labels = tuple(labels) if labels is not None else tuple(f"case{i}" for i in range(len(rows)))
        return cls(labels, rows)

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[CaseOutcome], k: int | None = None) -> "CorrectnessMatrix":
        """Build from outcomes of a single (backend, temperature) slice.

        Cases missing attempts inside 1..k are an error; extra attempts
        beyond k are ignored. Pending outcomes are counted, not scored.
        """
        by_case: dict[str, dict[int, CaseOutcome]] = defaultdict(dict)
        for o in outcomes:
            if o.attempt_index in by_case[o.case_id]:
                raise MetricsError(f"two outcomes for {o.case_id} attempt {o.attempt_index}")
            by_case[o.case_id][o.attempt_index] = o
        if not by_case:
            return cls((), ())
        available = min(max(a) for a in by_case.values())
        k = available if k is None else k
        labels = tuple(sorted(by_case))
        rows = []
        pending = 0
        for label in labels:
            attempts = by_case[label]
            missing = [i for i in range(1, k + 1) if i not in attempts]
            if missing:
                raise MetricsError(f"{label}: missing attempts {missing}")
            row = [attempts[i] for i in range(1, k + 1)]
            pending += sum(o.pending for o in row)
            rows.append(tuple(o.correct for o in row))
        return cls(labels, tuple(rows), pending)


def _check(m: CorrectnessMatrix, k: int) -> None:
    if m.pending:
        raise PendingOutcomes(f"{m.pending} outcome(s) still await adjudication", pending=m.pending)
    if not 1 <= k <= m.k:
        raise KOutOfRange(f"k={k} outside 1..{m.k}", k=k, max_k=m.k)
    if m.n == 0:
        raise MetricsError("no cases to score")


def pass_at_k(m: CorrectnessMatrix, k: int) -> Fraction:
    """Percentage of cases with at least one correct answer in their first k
    attempts."""
    _check(m, k)
    hits = sum(1 for r in m.rows if any(r[:k]))
    return Fraction(hits, m.n) * HUNDRED


def consistency_at_k(m: CorrectnessMatrix, k: int) -> Fraction:
    """Mean share of correct answers among the first k attempts."""
    _check(m, k)
    return sum((Fraction(sum(r[:k]), k) for r in m.rows), Fraction(0)) / m.n * HUNDRED


def curve(m: CorrectnessMatrix, metric: Callable[[CorrectnessMatrix, int], Fraction]) -> list[tuple[int, Fraction]]:
    return [(k, metric(m, k)) for k in range(1, m.k + 1)]


def temperature_series(matrices) -> list[tuple[float, Fraction]]:
    """(temperature, pass@1) in ascending temperature order. Accepts a
    mapping or a sequence of pairs; equal temperatures are rejected."""
    pairs = list(matrices.items()) if isinstance(matrices, Mapping) else list(matrices)
    seen: dict[str, float] = {}
    for t, _ in pairs:
        key = fmt_temperature(t)
        if key in seen:
            raise DuplicateTemperature(f"temperature {t} given more than once")
        seen[key] = float(t)
    return sorted(((float(t), pass_at_k(m, 1)) for t, m in pairs), key=lambda p: p[0])


# -------------------------------------------------------------- group tables


def dimension_value(dim: str, outcome: CaseOutcome, case: BugCase, cohorts: Mapping[str, str] | None = None) -> str:
    if dim == "backend":
        return outcome.backend_name
    if dim == "temperature":
        return fmt_temperature(outcome.temperature)
    if dim == "cohort":
        return (cohorts or {}).get(outcome.case_id, "original")
    if dim == "bug_type":
        return case.bug_kind.bug_type
    if dim == "bug_kind":
        return case.bug_kind.value
    if dim == "language":
        return case.language.value
    if dim == "reason_category":
        return case.ground_truth_reason.category.value
    raise MetricsError(f"unknown grouping dimension {dim!r}; choose from {', '.join(DIMENSIONS)}")


@dataclass(frozen=True)
class RateRow:
    group: tuple[tuple[str, str], ...]
    numerator: int
    denominator: int
    pending: int = 0

    @property
    def rate(self) -> Fraction | None:
        if self.pending or not self.denominator:
            return None
        return Fraction(self.numerator, self.denominator) * HUNDRED

    @property
    def partial(self) -> bool:
        return self.pending > 0


def _ordered_dims(group_by: Iterable[str]) -> tuple[str, ...]:
    dims = set(group_by)
    unknown = dims - set(DIMENSIONS)
    if unknown:
        raise MetricsError(f"unknown grouping dimension(s): {', '.join(sorted(unknown))}")
    return tuple(d for d in DIMENSIONS if d in dims)


def _first_attempts(outcomes: Iterable[CaseOutcome]) -> list[CaseOutcome]:
    return [o for o in outcomes if o.attempt_index == 1]


def _table(outcomes, cases, group_by, cohorts, hit: Callable[[CaseOutcome], bool]) -> list[RateRow]:
    dims = _ordered_dims(group_by)
    groups: dict[tuple, list[CaseOutcome]] = defaultdict(list)
    for o in _first_attempts(outcomes):
        case = cases[o.case_id]
        key = tuple((d, dimension_value(d, o, case, cohorts)) for d in dims)
        groups[key].append(o)
    rows = []
    for key in sorted(groups):
        members = groups[key]
        pending = sum(o.pending for o in members)
        rows.append(RateRow(key, sum(1 for o in members if not o.pending and hit(o)), len(members), pending))
    return rows


def detection_table(outcomes, cases: Mapping[str, BugCase], group_by=("backend",),
                    cohorts: Mapping[str, str] | None = None) -> list[RateRow]:
    """Attempt-1 correctness per group. Groups with pending outcomes are
    kept but carry no rate; empty groups never appear."""
    return _table(outcomes, cases, group_by, cohorts, lambda o: o.correct)


def detection_rates(outcomes, cases: Mapping[str, BugCase], group_by=("backend",),
                    cohorts: Mapping[str, str] | None = None) -> list[RateRow]:
    rows = detection_table(outcomes, cases, group_by, cohorts)
    _no_pending(rows)
    return rows


def _bad_output(o: CaseOutcome) -> bool:
    e = o.evidence
    if e.decision is VerdictDecision.NO and e.failure_reason is FailureReason.BAD_EXPLANATION:
        return True
    return e.decision is VerdictDecision.YES and e.failure_reason in (
        FailureReason.OUTPUT_NOT_COMPILING, FailureReason.MECHANICS_VIOLATED)


def incorrect_explanation_table(outcomes, cases: Mapping[str, BugCase], group_by=("backend",),
                                cohorts: Mapping[str, str] | None = None) -> list[RateRow]:
    """Type I: expected NO with an explanation judged wrong. Type II: YES
    whose program failed compilation or mechanics. Both over group size."""
    return _table(outcomes, cases, group_by, cohorts, _bad_output)


def incorrect_explanation_rate(outcomes, cases: Mapping[str, BugCase], group_by=("backend",),
                               cohorts: Mapping[str, str] | None = None) -> list[RateRow]:
    rows = incorrect_explanation_table(outcomes, cases, group_by, cohorts)
    _no_pending(rows)
    return rows


def union_table(outcomes, cases: Mapping[str, BugCase], group_by=(),
                cohorts: Mapping[str, str] | None = None) -> list[RateRow]:
    """Attempt-1 detection if any backend answering a case counts: a case
    is a hit when at least one backend got it right."""
    dims = _ordered_dims(d for d in group_by if d != "backend")
    per_case: dict[tuple, list[CaseOutcome]] = defaultdict(list)
    for o in _first_attempts(outcomes):
        case = cases[o.case_id]
        key = tuple((d, dimension_value(d, o, case, cohorts)) for d in dims)
        per_case[(key, o.case_id)].append(o)
    groups: dict[tuple, list[tuple[bool, bool]]] = defaultdict(list)
    for (key, _), members in per_case.items():
        hit = any(o.correct for o in members)
        groups[key].append((hit, not hit and any(o.pending for o in members)))
    return [RateRow(key, sum(h for h, _ in groups[key]), len(groups[key]), sum(p for _, p in groups[key]))
            for key in sorted(groups)]


def _no_pending(rows: Iterable[RateRow]) -> None:
    pending = sum(r.pending for r in rows)
    if pending:
        raise PendingOutcomes(f"{pending} outcome(s) still await adjudication", pending=pending)
