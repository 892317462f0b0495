"""Turn raw model output into a structured verdict.

Models are asked to put YES or NO alone on the first line. Many do not, so
the parser falls back to a short scan of the opening lines, and for Type II
answers pulls the refactored program out of fenced blocks (or, failing
that, out of the longest code-looking run of lines).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

from .corpus import SourceUnit
from .prompts import PromptKind

log = logging.getLogger(__name__)

RECOVERY_WINDOW = 5
MIN_CODE_RUN = 3


class VerdictDecision(str, Enum):
    YES = "yes"
    NO = "no"
    UNPARSEABLE = "unparseable"


class DecisionSource(str, Enum):
    EXACT_FIRST_LINE = "exact_first_line"
    RECOVERED = "recovered"
    NONE = "none"


@dataclass(frozen=True)
class Verdict:
    decision: VerdictDecision
    decision_source: DecisionSource
    body: str
    extracted_units: tuple[SourceUnit, ...] = ()
    reasoning_stripped: bool = False
    code_heuristic: bool = False  # units came from the unfenced fallback

    def __post_init__(self):
        if (self.decision is VerdictDecision.UNPARSEABLE) != (self.decision_source is DecisionSource.NONE):
            raise ValueError("UNPARSEABLE and decision source NONE go together")

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "decision_source": self.decision_source.value,
            "body": self.body,
            "extracted_units": [u.to_dict() for u in self.extracted_units],
            "reasoning_stripped": self.reasoning_stripped,
            "code_heuristic": self.code_heuristic,
        }

    @classmethod
    def from_dict(cls, d) -> "Verdict":
        return cls(
            VerdictDecision(d["decision"]),
            DecisionSource(d["decision_source"]),
            d["body"],
            tuple(SourceUnit(u["path"], u["text"]) for u in d.get("extracted_units", ())),
            bool(d.get("reasoning_stripped", False)),
            bool(d.get("code_heuristic", False)),
        )

    def serialize(self) -> str:
        """Decision line plus body, in the format the prompts request."""
        if self.decision is VerdictDecision.UNPARSEABLE:
            return self.body
        return f"{self.decision.value.upper()}\n{self.body}"


_THINK = re.compile(r"\A\s*<(think|thinking|reasoning|thought)>.*?</\1>\s*", re.S | re.I)
_TRIM = " \t\"'`*_~"
_STANDALONE = re.compile(r"(?<![A-Za-z0-9_])(YES|NO)(?![A-Za-z0-9_])")
_FENCE = re.compile(r"^[ \t]*(`{3,}|~{3,})[^\n]*\n(.*?)(?:^[ \t]*\1[ \t]*$|\Z)", re.S | re.M)
_FILE_HEADER = re.compile(r"^\s*(?://|#)\s*file:\s*(\S.*?)\s*$")
_BLOCK_OPENERS = re.compile(
    r"^\s*(?:def|class|if|elif|else|for|while|try|except|finally|with|async|case|default|match)\b"
)


def strip_reasoning(raw: str) -> tuple[str, bool]:
    m = _THINK.match(raw)
    if not m:
        return raw, False
    return raw[m.end():], True


def _nonblank(lines):
    return [(i, ln) for i, ln in enumerate(lines) if ln.strip()]


def _exact(line: str) -> VerdictDecision | None:
    word = line.strip().strip(_TRIM).strip().upper()
    if word == "YES":
        return VerdictDecision.YES
    if word == "NO":
        return VerdictDecision.NO
    return None


def _decide(text: str, window: int):
    lines = text.split("\n")
    nonblank = _nonblank(lines)
    if not nonblank:
        return VerdictDecision.UNPARSEABLE, DecisionSource.NONE, text
    first_idx, first = nonblank[0]
    exact = _exact(first)
    if exact is not None:
        body = "\n".join(lines[first_idx + 1:]).strip("\n")
        return exact, DecisionSource.EXACT_FIRST_LINE, body
    for _, ln in nonblank[:window]:
        m = _STANDALONE.search(ln)
        if m:
            log.info("decision recovered from line %r", ln.strip()[:80])
            return VerdictDecision(m.group(1).lower()), DecisionSource.RECOVERED, text.strip("\n")
    return VerdictDecision.UNPARSEABLE, DecisionSource.NONE, text.strip("\n")


def fenced_units(text: str) -> list[SourceUnit]:
    units = []
    for m in _FENCE.finditer(text):
        block = m.group(2)
        if block.endswith("\n"):
            block = block[:-1]
        first, _, rest = block.partition("\n")
        header = _FILE_HEADER.match(first)
        if header:
            units.append(SourceUnit(header.group(1), rest))
        else:
            units.append(SourceUnit(f"unit{len(units) + 1}", block))
    return [u for u in units if u.text.strip()]


def _looks_like_code(line: str) -> bool:
    s = line.rstrip()
    if not s:
        return False
    if s.endswith(("{", "}", ";")):
        return True
    # a trailing colon is also how prose introduces a listing
    return s.endswith(":") and bool(_BLOCK_OPENERS.match(s))


def code_run(text: str, min_lines: int = MIN_CODE_RUN) -> str | None:
    """Longest maximal run of code-looking lines (blank lines may sit inside
    a run but never start or end one)."""
    lines = text.split("\n")
    best: tuple[int, int, int] | None = None  # (count, start, end)
    start = end = None
    count = 0
    for i, ln in enumerate(lines + [None]):
        if ln is not None and _looks_like_code(ln):
            if start is None:
                start, count = i, 0
            end = i
            count += 1
            continue
        if ln is not None and not ln.strip() and start is not None:
            continue
        if start is not None and count >= min_lines and (best is None or count > best[0]):
            best = (count, start, end)
        start, count = None, 0
    if best is None:
        return None
    return "\n".join(lines[best[1]:best[2] + 1])


def parse(raw: str | None, expected_kind: PromptKind | str, window: int = RECOVERY_WINDOW,
          min_code_run: int = MIN_CODE_RUN) -> Verdict:
    """Parse a model reply. Never raises; malformed input yields UNPARSEABLE.

    Type II replies have their code extracted whatever the decision, so an
    answer that refuses the refactoring but still emits a program keeps the
    program for review. Only the stated decision is scored.
    """
    raw = raw or ""
    expected_kind = PromptKind(expected_kind)
    text, stripped = strip_reasoning(raw.replace("\r\n", "\n"))
    decision, source, body = _decide(text, window)
    units: list[SourceUnit] = []
    heuristic = False
    if expected_kind is PromptKind.TYPE2_APPLY and decision is not VerdictDecision.UNPARSEABLE:
        units = fenced_units(body)
        if not units and "```" not in body and "~~~" not in body:
            run = code_run(body, min_code_run)
            if run is not None:
                log.info("no fenced code; took a %d-line unfenced run", run.count("\n") + 1)
                units = [SourceUnit("unit1", run)]
                heuristic = True
    return Verdict(decision, source, body, tuple(units), stripped, heuristic)
