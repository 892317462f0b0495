"""Refactoring mechanics rules.

Each rule reads the refactoring parameters of a Type II case (for example
``push down A.f to class C``) and checks declarations in the transformed
program. The checks are token level: a member counts as declared in a class
when the declaration scanner finds it directly in that class body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable

from ..corpus import BugCase, SourceUnit
from ..errors import UnlexableSource, WrongKind
from ..structure import ClassInfo, declarations, scan_classes

NO_RULE = "none"


@dataclass(frozen=True)
class Finding:
    check: str
    passed: bool

    def to_dict(self) -> dict:
        return {"check": self.check, "passed": self.passed}


@dataclass(frozen=True)
class MechanicsResult:
    applicable_rule: str
    ok: bool
    findings: tuple[Finding, ...] = ()

    def __post_init__(self):
        if self.ok != all(f.passed for f in self.findings):
            raise ValueError("ok must equal the conjunction of findings")

    @classmethod
    def of(cls, rule: str, findings: Iterable[Finding]) -> "MechanicsResult":
        findings = tuple(findings)
        return cls(rule, all(f.passed for f in findings), findings)

    def to_dict(self) -> dict:
        return {"applicable_rule": self.applicable_rule, "ok": self.ok,
                "findings": [f.to_dict() for f in self.findings]}

    @classmethod
    def from_dict(cls, d) -> "MechanicsResult":
        return cls(d["applicable_rule"], d["ok"], tuple(Finding(**f) for f in d.get("findings", ())))


# ------------------------------------------------------------------ helpers


def class_table(units: Iterable[SourceUnit], language) -> dict[str, ClassInfo]:
    table: dict[str, ClassInfo] = {}
    for unit in units:
        for info in scan_classes(unit.text, language):
            if info.name in table:
                prev = table[info.name]
                prev.methods.extend(info.methods)
                prev.fields.extend(info.fields)
                prev.supers.extend(s for s in info.supers if s not in prev.supers)
            else:
                table[info.name] = ClassInfo(info.name, list(info.supers), list(info.methods), list(info.fields))
    return table


def _members(info: ClassInfo | None, what: str) -> list[str]:
    if info is None:
        return []
    return info.methods if what == "method" else info.fields


_MEMBER_MOVE = re.compile(
    r"^\s*(?:pull\s+up|push\s+down)\s+(?:(?:method|field)\s+)?"
    r"(?:(?P<src>[\w$]+)\.)?(?P<member>[\w$]+)(?:\(\))?\s+(?:to|into)\s+(?:(?:class|super\s*class)\s+)?(?P<dst>[\w$]+)\s*\.?\s*$",
    re.I,
)
_RENAME = re.compile(
    r"^\s*rename\s+(?:(?:method|variable|field)\s+)?(?:(?P<owner>[\w$]+)\.)?(?P<old>[\w$]+)(?:\(\))?\s+to\s+(?P<new>[\w$]+)\s*\.?\s*$",
    re.I,
)


def _params_not_understood(rule: str, params: str | None) -> MechanicsResult:
    return MechanicsResult.of(rule, [Finding(f"NO_RULE: parameters {params!r} not understood by {rule}", True)])


# -------------------------------------------------------------------- rules


def _pull_up(what: str):
    def rule(case: BugCase, transformed: list[SourceUnit]) -> MechanicsResult:
        name = f"pull_up_{what}"
        m = _MEMBER_MOVE.match(case.refactoring_params or "")
        if not m:
            return _params_not_understood(name, case.refactoring_params)
        member, target, src = m["member"], m["dst"], m["src"]
        before = class_table(case.before, case.language)
        after = class_table(transformed, case.language)
        if src:
            subclasses = [src]
        else:
            subclasses = sorted(c.name for c in before.values()
                                if target in c.supers and member in _members(c, what))
        findings = [Finding(f"{what} {member} declared in superclass {target}",
                            member in _members(after.get(target), what))]
        for sub in subclasses:
            gone = member not in _members(after.get(sub), what)
            findings.append(Finding(
                f"{what} {member} removed from subclass {sub}" if gone
                else f"{what} {member} still declared in subclass {sub}",
                gone,
            ))
        return MechanicsResult.of(name, findings)
    return rule


def _push_down(what: str):
    def rule(case: BugCase, transformed: list[SourceUnit]) -> MechanicsResult:
        name = f"push_down_{what}"
        m = _MEMBER_MOVE.match(case.refactoring_params or "")
        if not m or not m["src"]:
            return _params_not_understood(name, case.refactoring_params)
        member, source, target = m["member"], m["src"], m["dst"]
        after = class_table(transformed, case.language)
        gone = member not in _members(after.get(source), what)
        return MechanicsResult.of(name, [
            Finding(f"{what} {member} removed from {source}" if gone
                    else f"{what} {member} still declared in source class {source}", gone),
            Finding(f"{what} {member} declared in target class {target}",
                    member in _members(after.get(target), what)),
        ])
    return rule


def _rename(kind: str):
    def rule(case: BugCase, transformed: list[SourceUnit]) -> MechanicsResult:
        name = f"rename_{kind}"
        m = _RENAME.match(case.refactoring_params or "")
        if not m:
            return _params_not_understood(name, case.refactoring_params)
        declared: set[str] = set()
        for unit in transformed:
            d = declarations(unit.text, case.language)
            declared |= d.methods if kind == "method" else d.variables
        old, new = m["old"], m["new"]
        return MechanicsResult.of(name, [
            Finding(f"{old} no longer declared" if old not in declared else f"{old} still declared", old not in declared),
            Finding(f"{new} declared", new in declared),
        ])
    return rule


Rule = Callable[[BugCase, list[SourceUnit]], MechanicsResult]

RULES: dict[str, Rule] = {
    "pull up method": _pull_up("method"),
    "pull up field": _pull_up("field"),
    "push down method": _push_down("method"),
    "push down field": _push_down("field"),
    "rename method": _rename("method"),
    "rename variable": _rename("variable"),
    "rename field": _rename("variable"),
}


def register_rule(refactoring_kind: str, rule: Rule) -> None:
    RULES[refactoring_kind.strip().lower()] = rule


def check_mechanics(case: BugCase, transformed: Iterable[SourceUnit]) -> MechanicsResult:
    if case.is_type1:
        raise WrongKind(f"{case.id}: mechanics rules apply to Type II cases only")
    rule = RULES.get(case.refactoring_kind.strip().lower())
    if rule is None:
        return MechanicsResult.of(NO_RULE, [Finding(f"NO_RULE: no rule registered for {case.refactoring_kind!r}", True)])
    try:
        return rule(case, list(transformed))
    except UnlexableSource as exc:
        return MechanicsResult.of(case.refactoring_kind, [Finding(f"transformed program cannot be lexed: {exc}", False)])
