"""Refactoring-bug corpus: case model, on-disk format, loading and selection."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import DuplicateId, MalformedCase, UnknownId

log = logging.getLogger(__name__)

DEFAULT_LOC_CAP = 61
CASE_SUFFIX = ".case.json"
REGISTRY_FILE = "refactorings.txt"


class Language(str, Enum):
    JAVA = "java"
    PYTHON = "python"
    C = "c"

    @property
    def comment_prefix(self) -> str:
        return "#" if self is Language.PYTHON else "//"

    @property
    def extension(self) -> str:
        return {"java": ".java", "python": ".py", "c": ".c"}[self.value]


class BugKind(str, Enum):
    TYPE1_COMPILE_ERROR = "type1_compile_error"
    TYPE1_RUNTIME_ERROR = "type1_runtime_error"
    TYPE1_BEHAVIOR_CHANGE = "type1_behavior_change"
    TYPE2_BLOCKED_VALID = "type2_blocked_valid"

    @property
    def is_type1(self) -> bool:
        return self is not BugKind.TYPE2_BLOCKED_VALID

    @property
    def bug_type(self) -> str:
        return "TYPE1" if self.is_type1 else "TYPE2"


class Decision(str, Enum):
    YES = "yes"
    NO = "no"


class ReasonCategory(str, Enum):
    COMPILE_ERROR = "compile_error"
    RUNTIME_ERROR = "runtime_error"
    BEHAVIOR_CHANGE = "behavior_change"
    NOT_APPLICABLE = "not_applicable"


EXPECTED_REASON = {
    BugKind.TYPE1_COMPILE_ERROR: ReasonCategory.COMPILE_ERROR,
    BugKind.TYPE1_RUNTIME_ERROR: ReasonCategory.RUNTIME_ERROR,
    BugKind.TYPE1_BEHAVIOR_CHANGE: ReasonCategory.BEHAVIOR_CHANGE,
    BugKind.TYPE2_BLOCKED_VALID: ReasonCategory.NOT_APPLICABLE,
}


@dataclass(frozen=True)
class SourceUnit:
    path: str
    text: str

    def to_dict(self) -> dict:
        return {"path": self.path, "text": self.text}


@dataclass(frozen=True)
class GroundTruthReason:
    category: ReasonCategory
    text: str


@dataclass(frozen=True)
class BugCase:
    id: str
    language: Language
    refactoring_kind: str
    bug_kind: BugKind
    before: tuple[SourceUnit, ...]
    after: tuple[SourceUnit, ...] | None
    refactoring_params: str | None
    expected_decision: Decision
    ground_truth_reason: GroundTruthReason
    provenance: str
    pinned_identifiers: tuple[str, ...] = ()

    @property
    def is_type1(self) -> bool:
        return self.bug_kind.is_type1

    def units(self) -> Iterator[SourceUnit]:
        yield from self.before
        yield from self.after or ()

    def to_dict(self) -> dict:
        doc = {
            "id": self.id,
            "language": self.language.value,
            "refactoring_kind": self.refactoring_kind,
            "bug_kind": self.bug_kind.value,
            "before": [u.to_dict() for u in self.before],
        }
        if self.after is not None:
            doc["after"] = [u.to_dict() for u in self.after]
        if self.refactoring_params is not None:
            doc["refactoring_params"] = self.refactoring_params
        doc["expected_decision"] = self.expected_decision.value
        doc["ground_truth_reason"] = {
            "category": self.ground_truth_reason.category.value,
            "text": self.ground_truth_reason.text,
        }
        doc["provenance"] = self.provenance
        if self.pinned_identifiers:
            doc["pinned_identifiers"] = list(self.pinned_identifiers)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def with_sources(self, before, after, params) -> "BugCase":
        return replace(self, before=tuple(before), after=None if after is None else tuple(after),
                       refactoring_params=params)


_REQUIRED = ("id", "language", "refactoring_kind", "bug_kind", "before", "expected_decision",
             "ground_truth_reason", "provenance")
_OPTIONAL = ("after", "refactoring_params", "pinned_identifiers")


def _enum(cls, value, case_id, name):
    try:
        return cls(value)
    except ValueError:
        allowed = "|".join(m.value for m in cls)
        raise MalformedCase(case_id, name, f"expected one of {allowed}, got {value!r}") from None


def _units(raw, case_id, name) -> tuple[SourceUnit, ...]:
    if not isinstance(raw, list):
        raise MalformedCase(case_id, name, "expected an array of {path, text} objects")
    out = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict) or set(item) != {"path", "text"}:
            raise MalformedCase(case_id, f"{name}[{k}]", "expected exactly {path, text}")
        if not isinstance(item["path"], str) or not isinstance(item["text"], str):
            raise MalformedCase(case_id, f"{name}[{k}]", "path and text must be strings")
        out.append(SourceUnit(item["path"], item["text"]))
    return tuple(out)


def case_from_dict(doc: Mapping, fallback_id: str = "?") -> BugCase:
    """Build a case from a parsed document; structural problems raise
    MalformedCase. Semantic invariants are left to :func:`validate_case`."""
    if not isinstance(doc, Mapping):
        raise MalformedCase(fallback_id, "<document>", "top level must be an object")
    case_id = doc.get("id") if isinstance(doc.get("id"), str) else fallback_id
    for name in _REQUIRED:
        if name not in doc:
            raise MalformedCase(case_id, name, "missing required field")
    extra = set(doc) - set(_REQUIRED) - set(_OPTIONAL)
    if extra:
        raise MalformedCase(case_id, sorted(extra)[0], "unknown field")
    for name in ("id", "refactoring_kind", "provenance"):
        if not isinstance(doc[name], str):
            raise MalformedCase(case_id, name, "must be a string")
    reason = doc["ground_truth_reason"]
    if not isinstance(reason, Mapping) or set(reason) != {"category", "text"}:
        raise MalformedCase(case_id, "ground_truth_reason", "expected exactly {category, text}")
    params = doc.get("refactoring_params")
    if params is not None and not isinstance(params, str):
        raise MalformedCase(case_id, "refactoring_params", "must be a string")
    pinned = doc.get("pinned_identifiers", [])
    if not isinstance(pinned, list) or not all(isinstance(p, str) for p in pinned):
        raise MalformedCase(case_id, "pinned_identifiers", "must be an array of strings")
    return BugCase(
        id=doc["id"],
        language=_enum(Language, doc["language"], case_id, "language"),
        refactoring_kind=doc["refactoring_kind"],
        bug_kind=_enum(BugKind, doc["bug_kind"], case_id, "bug_kind"),
        before=_units(doc["before"], case_id, "before"),
        after=_units(doc["after"], case_id, "after") if "after" in doc else None,
        refactoring_params=params,
        expected_decision=_enum(Decision, doc["expected_decision"], case_id, "expected_decision"),
        ground_truth_reason=GroundTruthReason(
            _enum(ReasonCategory, reason["category"], case_id, "ground_truth_reason.category"),
            str(reason["text"]),
        ),
        provenance=doc["provenance"],
        pinned_identifiers=tuple(pinned),
    )


def read_case(path: Path) -> BugCase:
    fallback = path.name[: -len(CASE_SUFFIX)] if path.name.endswith(CASE_SUFFIX) else path.stem
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedCase(fallback, "<document>", f"unreadable JSON: {exc}") from None
    return case_from_dict(doc, fallback)


def write_case(case: BugCase, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{case.id}{CASE_SUFFIX}"
    path.write_text(case.to_json(), encoding="utf-8")
    return path


# ------------------------------------------------------------------ validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    severity: str = "error"


def count_lines(units: Iterable[SourceUnit]) -> int:
    return sum(len(u.text.splitlines()) for u in units)


def validate_case(case: BugCase, registry: Iterable[str] | None = None,
                  loc_cap: int = DEFAULT_LOC_CAP) -> list[Violation]:
    """All invariant violations of ``case``; empty when it is well formed.

    The LOC cap yields a ``warning`` severity violation rather than an error.
    """
    v: list[Violation] = []
    if not case.id.strip():
        v.append(Violation("EMPTY_ID", "case id is empty"))
    if not case.before:
        v.append(Violation("NO_BEFORE", "case has no source units"))
    for label, units in (("before", case.before), ("after", case.after or ())):
        seen = set()
        for u in units:
            if not u.path.strip():
                v.append(Violation("EMPTY_PATH", f"{label}: unit with empty path"))
            elif u.path in seen:
                v.append(Violation("DUPLICATE_PATH", f"{label}: path {u.path!r} repeated"))
            seen.add(u.path)
            if not u.text.strip():
                v.append(Violation("EMPTY_TEXT", f"{label}: unit {u.path!r} has no text"))
    if case.bug_kind.is_type1:
        if not case.after:
            v.append(Violation("TYPE1_MISSING_AFTER", "Type I case needs the refactored program"))
        if case.refactoring_params is not None:
            v.append(Violation("TYPE1_HAS_PARAMS", "Type I case must not carry refactoring_params"))
        if case.expected_decision is not Decision.NO:
            v.append(Violation("EXPECTED_DECISION_MISMATCH", "Type I cases expect NO"))
    else:
        if case.after is not None:
            v.append(Violation("TYPE2_HAS_AFTER", "Type II case must not carry a refactored program"))
        if not (case.refactoring_params or "").strip():
            v.append(Violation("TYPE2_MISSING_PARAMS", "Type II case needs refactoring_params"))
        if case.expected_decision is not Decision.YES:
            v.append(Violation("EXPECTED_DECISION_MISMATCH", "Type II cases expect YES"))
    if case.ground_truth_reason.category is not EXPECTED_REASON[case.bug_kind]:
        v.append(Violation(
            "REASON_MISMATCH",
            f"{case.bug_kind.value} requires reason {EXPECTED_REASON[case.bug_kind].value}, "
            f"got {case.ground_truth_reason.category.value}",
        ))
    if registry is not None and case.refactoring_kind not in set(registry):
        v.append(Violation("UNKNOWN_REFACTORING_KIND", f"{case.refactoring_kind!r} is not registered"))
    loc = count_lines(case.before)
    if loc > loc_cap:
        v.append(Violation("LOC_CAP_EXCEEDED", f"before has {loc} lines (cap {loc_cap})", "warning"))
    return v


# ---------------------------------------------------------------------- index


@dataclass(frozen=True)
class CorpusProblem:
    case_id: str
    code: str
    field: str
    reason: str


@dataclass(frozen=True)
class CorpusIndex:
    cases: tuple[BugCase, ...] = ()
    registry: frozenset[str] = frozenset()
    problems: tuple[CorpusProblem, ...] = ()
    warnings: tuple[CorpusProblem, ...] = ()
    counts: Mapping[tuple[Language, BugKind], int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "counts", _tally(self.cases))

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[BugCase]:
        return iter(self.cases)

    def ids(self) -> list[str]:
        return [c.id for c in self.cases]

    def get(self, case_id: str) -> BugCase:
        for c in self.cases:
            if c.id == case_id:
                return c
        raise UnknownId(f"no case with id {case_id!r}", case_id=case_id)

    def count(self, language: Language, bug_kind: BugKind) -> int:
        return self.counts.get((language, bug_kind), 0)


def _tally(cases) -> dict:
    return dict(Counter((c.language, c.bug_kind) for c in cases))


def default_registry() -> frozenset[str]:
    text = resources.files("sentinel").joinpath("data/corpus", REGISTRY_FILE).read_text(encoding="utf-8")
    return parse_registry(text)


def parse_registry(text: str) -> frozenset[str]:
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")
    )


def builtin_corpus_root() -> Path:
    return Path(str(resources.files("sentinel").joinpath("data/corpus")))


def load_corpus(root, registry: Iterable[str] | None = None,
                loc_cap: int = DEFAULT_LOC_CAP) -> CorpusIndex:
    """Load every ``*.case.json`` directly under ``root``.

    Bad documents do not abort the load: each is reported in
    ``index.problems`` (MALFORMED_CASE / DUPLICATE_ID) and left out.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} is not a directory")
    if registry is None:
        reg_path = root / REGISTRY_FILE
        registry = parse_registry(reg_path.read_text(encoding="utf-8")) if reg_path.exists() else default_registry()
    registry = frozenset(registry)
    problems: list[CorpusProblem] = []
    warnings: list[CorpusProblem] = []
    by_id: dict[str, BugCase] = {}
    for path in sorted(root.glob(f"*{CASE_SUFFIX}")):
        try:
            case = read_case(path)
        except MalformedCase as exc:
            problems.append(CorpusProblem(exc.case_id, exc.code, exc.field, exc.reason))
            continue
        if case.id in by_id:
            problems.append(CorpusProblem(case.id, DuplicateId.code, "id", f"also defined before {path.name}"))
            continue
        violations = validate_case(case, registry, loc_cap)
        errors = [x for x in violations if x.severity == "error"]
        if errors:
            for x in errors:
                problems.append(CorpusProblem(case.id, MalformedCase.code, x.code, x.message))
            continue
        warnings.extend(CorpusProblem(case.id, x.code, "before", x.message) for x in violations)
        by_id[case.id] = case
    for p in problems:
        log.warning("corpus: %s %s (%s): %s", p.code, p.case_id, p.field, p.reason)
    cases = tuple(by_id[k] for k in sorted(by_id))
    return CorpusIndex(cases, registry, tuple(problems), tuple(warnings))


@dataclass(frozen=True)
class CaseSelector:
    languages: frozenset[Language] | None = None
    bug_kinds: frozenset[BugKind] | None = None
    refactoring_kinds: frozenset[str] | None = None
    ids: tuple[str, ...] | None = None

    @classmethod
    def from_mapping(cls, raw: Mapping | None) -> "CaseSelector":
        raw = raw or {}
        def opt(name, conv):
            values = raw.get(name)
            if values is None:
                return None
            if not values:
                raise ValueError(f"selector field {name!r} must be non-empty when present")
            return conv(values)
        return cls(
            languages=opt("languages", lambda xs: frozenset(Language(str(x).lower()) for x in xs)),
            bug_kinds=opt("bug_kinds", lambda xs: frozenset(BugKind(str(x).lower()) for x in xs)),
            refactoring_kinds=opt("refactoring_kinds", frozenset),
            ids=opt("ids", tuple),
        )

    def matches(self, case: BugCase) -> bool:
        return (
            (self.languages is None or case.language in self.languages)
            and (self.bug_kinds is None or case.bug_kind in self.bug_kinds)
            and (self.refactoring_kinds is None or case.refactoring_kind in self.refactoring_kinds)
            and (self.ids is None or case.id in self.ids)
        )


def filter_cases(index: CorpusIndex, selector: CaseSelector | Mapping | None = None) -> CorpusIndex:
    if not isinstance(selector, CaseSelector):
        selector = CaseSelector.from_mapping(selector)
    if selector.ids is not None:
        known = set(index.ids())
        missing = [i for i in selector.ids if i not in known]
        if missing:
            raise UnknownId(f"unknown case id(s): {', '.join(missing)}", ids=missing)
    kept = tuple(c for c in index.cases if selector.matches(c))
    return CorpusIndex(kept, index.registry, index.problems, index.warnings)
