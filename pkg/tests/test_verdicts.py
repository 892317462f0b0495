import json

import pytest
from hypothesis import given, strategies as st

from conftest import FIXTURES
from sentinel.prompts import PromptKind
from sentinel.verdicts import (
    DecisionSource,
    Verdict,
    VerdictDecision,
    code_run,
    fenced_units,
    parse,
    strip_reasoning,
)

GOLDENS = json.loads((FIXTURES / "transcripts.json").read_text())


@pytest.mark.parametrize("golden", GOLDENS, ids=[g["name"] for g in GOLDENS])
def test_golden_transcript(golden):
    v = parse(golden["raw"], golden["kind"])
    e = golden["expect"]
    assert v.decision.value == e["decision"]
    assert v.decision_source.value == e["source"]
    assert v.body == e["body"]
    assert [[u.path, u.text] for u in v.extracted_units] == e["units"]
    assert (v.reasoning_stripped, v.code_heuristic) == (e["reasoning_stripped"], e["code_heuristic"])


def test_none_input_is_unparseable():
    v = parse(None, PromptKind.TYPE1_CHECK)
    assert v.decision is VerdictDecision.UNPARSEABLE and v.decision_source is DecisionSource.NONE


def test_type1_never_extracts_code():
    v = parse("YES\n```java\nclass A {}\n```", PromptKind.TYPE1_CHECK)
    assert v.extracted_units == ()


def test_fence_inside_type2_suppresses_heuristic():
    v = parse("YES\n```\n\n```\nclass A {\n int x;\n}\n", PromptKind.TYPE2_APPLY)
    assert v.extracted_units == () and not v.code_heuristic


def test_unterminated_fence_runs_to_end():
    assert [u.text for u in fenced_units("```java\nclass A {}\n")] == ["class A {}"]


def test_recovery_window_is_configurable():
    raw = "a\nb\nc\nNO"
    assert parse(raw, "type1_check", window=3).decision is VerdictDecision.UNPARSEABLE
    assert parse(raw, "type1_check", window=4).decision is VerdictDecision.NO


def test_code_run_prefers_longest():
    text = "x {\n}\ny;\nprose here\na {\nb;\nc;\n}\n"
    assert code_run(text) == "a {\nb;\nc;\n}"
    assert code_run("one;\ntwo;", min_lines=3) is None


def test_python_block_openers_count_as_code():
    text = "Result:\nclass K:\n    def run(self):\n        pass\n"
    # only lines ending in ':' with a block keyword qualify, so the run is 2 lines
    assert code_run(text, min_lines=2) == "class K:\n    def run(self):"


def test_strip_only_leading_block():
    assert strip_reasoning("NO <think>x</think>") == ("NO <think>x</think>", False)
    assert strip_reasoning("<reasoning>a</reasoning>YES") == ("YES", True)


def test_invariant_enforced():
    with pytest.raises(ValueError):
        Verdict(VerdictDecision.UNPARSEABLE, DecisionSource.RECOVERED, "")
    with pytest.raises(ValueError):
        Verdict(VerdictDecision.YES, DecisionSource.NONE, "")


def test_serialize():
    assert Verdict(VerdictDecision.NO, DecisionSource.EXACT_FIRST_LINE, "why").serialize() == "NO\nwhy"


@given(st.text(max_size=300), st.sampled_from(list(PromptKind)))
def test_parse_is_total_and_deterministic(raw, kind):
    v = parse(raw, kind)
    assert parse(raw, kind) == v
    assert (v.decision is VerdictDecision.UNPARSEABLE) == (v.decision_source is DecisionSource.NONE)
    assert Verdict.from_dict(v.to_dict()) == v


@given(st.sampled_from(["YES", "NO"]), st.text(alphabet=st.characters(blacklist_characters="`~"), max_size=200))
def test_serialize_round_trip(decision, body):
    body = body.strip("\n")
    v = Verdict(VerdictDecision(decision.lower()), DecisionSource.EXACT_FIRST_LINE, body)
    again = parse(v.serialize(), PromptKind.TYPE1_CHECK)
    assert again.decision is v.decision and again.body == body
