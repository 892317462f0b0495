from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from sentinel.corpus import builtin_corpus_root, load_corpus
from sentinel.errors import DuplicateTemperature, KOutOfRange, MetricsError, PendingOutcomes
from sentinel.metrics import (
    CorrectnessMatrix,
    consistency_at_k,
    curve,
    detection_rates,
    detection_table,
    fmt_pct,
    fmt_temperature,
    incorrect_explanation_rate,
    pass_at_k,
    temperature_series,
    union_table,
)
from sentinel.oracles.judge import CaseOutcome, Evidence, FailureReason, OutcomeStatus
from sentinel.verdicts import VerdictDecision

matrices = st.integers(1, 10).flatmap(
    lambda k: st.lists(st.lists(st.booleans(), min_size=k, max_size=k), min_size=1, max_size=20))


def test_worked_example():
    m = CorrectnessMatrix.from_rows([[1, 1, 0], [0, 0, 0]])
    assert pass_at_k(m, 3) == 50 and fmt_pct(pass_at_k(m, 3)) == "50.0"
    assert consistency_at_k(m, 3) == Fraction(100, 3) and fmt_pct(consistency_at_k(m, 3)) == "33.3"


def test_small_values():
    m = CorrectnessMatrix.from_rows([[0, 1], [0, 0], [1, 1]])
    assert curve(m, pass_at_k) == [(1, Fraction(100, 3)), (2, Fraction(200, 3))]
    assert curve(m, consistency_at_k) == [(1, Fraction(100, 3)), (2, Fraction(50))]


def test_fmt():
    assert fmt_pct(Fraction(1000, 14)) == "71.4"
    assert fmt_pct(Fraction(2, 3) * 100) == "66.7"
    assert fmt_pct(Fraction(1, 8) * 100, 1) == "12.5"
    assert fmt_pct(Fraction(5, 80) * 100, 1) == "6.3"  # 6.25 rounds half up
    assert fmt_pct(None) == ""
    assert fmt_temperature(0.5) == "0.5" and fmt_temperature(0) == "0" and fmt_temperature(None) == ""


def test_errors():
    m = CorrectnessMatrix.from_rows([[1, 0]])
    with pytest.raises(KOutOfRange):
        pass_at_k(m, 3)
    with pytest.raises(KOutOfRange):
        consistency_at_k(m, 0)
    with pytest.raises(MetricsError):
        CorrectnessMatrix.from_rows([[1, 0], [1]])
    with pytest.raises(PendingOutcomes):
        pass_at_k(CorrectnessMatrix(("a",), ((False,),), pending=1), 1)


@given(matrices)
def test_properties(rows):
    m = CorrectnessMatrix.from_rows(rows)
    previous = Fraction(0)
    for k in range(1, m.k + 1):
        p, c = pass_at_k(m, k), consistency_at_k(m, k)
        assert 0 <= c <= p <= 100
        assert p >= previous
        previous = p
    assert pass_at_k(m, 1) == consistency_at_k(m, 1)


@given(matrices, st.randoms())
def test_row_order_does_not_matter(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a, b = CorrectnessMatrix.from_rows(rows), CorrectnessMatrix.from_rows(shuffled)
    assert pass_at_k(a, a.k) == pass_at_k(b, b.k) and consistency_at_k(a, a.k) == consistency_at_k(b, b.k)


def test_exhaustive_small_space():
    # every 2x2 matrix against the definitions
    for bits in product([0, 1], repeat=4):
        rows = [bits[:2], bits[2:]]
        m = CorrectnessMatrix.from_rows(rows)
        for k in (1, 2):
            assert pass_at_k(m, k) == Fraction(sum(any(r[:k]) for r in rows) * 100, 2)
            assert consistency_at_k(m, k) == Fraction(sum(sum(r[:k]) for r in rows) * 100, 2 * k)


def test_all_correct_and_none():
    assert pass_at_k(CorrectnessMatrix.from_rows([[1, 1]] * 3), 2) == 100
    assert consistency_at_k(CorrectnessMatrix.from_rows([[0, 0]] * 3), 2) == 0


def test_temperature_series():
    m = CorrectnessMatrix.from_rows([[1], [0]])
    assert temperature_series({1.0: m, 0.0: m, 0.5: m}) == [(0.0, 50), (0.5, 50), (1.0, 50)]
    with pytest.raises(DuplicateTemperature):
        temperature_series([(0.5, m), (0.50, m)])


# ------------------------------------------------------------------ tables


def outcome(case_id, correct=True, attempt=1, backend="b", decision=VerdictDecision.NO,
            reason=None, pending=False):
    if pending:
        return CaseOutcome(case_id, backend, attempt, False, OutcomeStatus.PENDING_ADJUDICATION,
                           Evidence(decision))
    reason = reason or (FailureReason.NONE if correct else FailureReason.WRONG_DECISION)
    return CaseOutcome(case_id, backend, attempt, correct, OutcomeStatus.DECIDED, Evidence(decision, reason))


@pytest.fixture(scope="module")
def cases():
    return {c.id: c for c in load_corpus(builtin_corpus_root())}


def test_from_outcomes(cases):
    outs = [outcome("jdt-push-down-method", True, 1), outcome("jdt-push-down-method", False, 2)]
    m = CorrectnessMatrix.from_outcomes(outs)
    assert m.rows == ((True, False),)
    with pytest.raises(MetricsError):
        CorrectnessMatrix.from_outcomes(outs + [outcome("jdt-push-down-method", True, 2)])
    with pytest.raises(MetricsError):
        CorrectnessMatrix.from_outcomes(outs + [outcome("rope-rename-variable-keyword", True, 2)], k=2)


def test_detection_by_bug_kind(cases):
    type1 = sorted(c for c in cases if cases[c].is_type1)
    outs = [outcome(c, i < 4) for i, c in enumerate(type1)] + [outcome("jdt-pull-up-method", False, 2)]
    rows = detection_rates(outs, cases, group_by={"bug_kind"})
    by = {dict(r.group)["bug_kind"]: (r.numerator, r.denominator) for r in rows}
    assert sum(d for _, d in by.values()) == 6  # attempt 2 of pull_up is ignored, empty groups absent
    assert "type2_blocked_valid" not in by


def test_five_of_seven():
    m = CorrectnessMatrix.from_rows([[1]] * 5 + [[0]] * 2)
    assert fmt_pct(pass_at_k(m, 1)) == "71.4"


def test_pending_groups(cases):
    outs = [outcome("jdt-push-down-method", pending=True), outcome("rope-rename-variable-keyword", True)]
    rows = detection_table(outs, cases, group_by=())
    assert rows[0].pending == 1 and rows[0].rate is None
    with pytest.raises(PendingOutcomes):
        detection_rates(outs, cases)


def test_incorrect_explanations(cases):
    outs = [
        outcome("jdt-push-down-method", False, reason=FailureReason.BAD_EXPLANATION),
        outcome("rope-rename-variable-keyword", False, decision=VerdictDecision.YES),
        outcome("cdt-extract-function-c", True),
        outcome("jdt-pull-up-method", False, decision=VerdictDecision.YES,
                reason=FailureReason.OUTPUT_NOT_COMPILING),
        outcome("jrrt-push-down-field", True, decision=VerdictDecision.YES),
    ]
    rows = {dict(r.group)["bug_type"]: r for r in incorrect_explanation_rate(outs, cases, {"bug_type"})}
    assert (rows["TYPE1"].numerator, rows["TYPE1"].denominator) == (1, 3)
    assert rows["TYPE2"].rate == 50


def test_union(cases):
    outs = [outcome("jdt-push-down-method", False, backend="x"), outcome("jdt-push-down-method", True, backend="y"),
            outcome("rope-rename-variable-keyword", False, backend="x"),
            outcome("rope-rename-variable-keyword", False, backend="y")]
    (row,) = union_table(outs, cases)
    assert (row.numerator, row.denominator) == (1, 2)


def test_unknown_dimension(cases):
    with pytest.raises(MetricsError):
        detection_table([outcome("jdt-push-down-method")], cases, group_by={"colour"})


def test_larger_scale_values_format():
    # 70 Type I and 30 Type II cases; display rounding of whole-dataset counts
    type1 = lambda hits: CorrectnessMatrix.from_rows([[1]] * hits + [[0]] * (70 - hits))
    assert fmt_pct(pass_at_k(type1(50), 1)) == "71.4"
    series = temperature_series({0.5: type1(65), 0.0: type1(61)})
    assert [(t, fmt_pct(v)) for t, v in series] == [(0.0, "87.1"), (0.5, "92.9")]
    type2 = CorrectnessMatrix.from_rows([[1]] * 11 + [[0]] * 19)
    assert fmt_pct(pass_at_k(type2, 1)) == "36.7"
