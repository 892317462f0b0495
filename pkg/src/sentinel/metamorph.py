"""Metamorphic variants of corpus cases.

A variant renames user-declared identifiers and remaps integer literals
while leaving the bug intact. Renaming is lexical: every identifier token
with a mapped name is replaced, across all units of the case, and nothing
inside string literals or comments is touched. Identifiers that carry the
bug (keywords, platform names, anything quoted in backticks in the ground
truth reason, and a case's own pinned list) are never renamed.
"""

from __future__ import annotations

import json
import os
import random
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path, PurePosixPath
from typing import Iterable, Mapping

from .corpus import BugCase, GroundTruthReason, Language, SourceUnit, load_corpus, write_case
from .errors import RenameCollision
from .lexer import IDENT, NUMBER, STRING, reserved_for, tokenize
from .oracles.static import CheckerConfig, check_static
from .structure import Declarations, declarations

MAX_ATTEMPTS = 100
LITERAL_RANGE = (2, 999)

# words of the refactoring parameter grammar; program names equal to one of
# these are pinned so that parameters stay parseable after renaming
PARAM_WORDS = frozenset({"pull", "up", "push", "down", "to", "into", "class", "rename", "method", "field", "variable"})


class Scope(str, Enum):
    VARIABLES = "variables"
    METHODS = "methods"
    CLASSES = "classes"
    PACKAGES = "packages"
    NUMBERS = "numbers"


def parse_scope(value) -> frozenset[Scope]:
    if isinstance(value, str):
        value = [v for v in re.split(r"[,+\s]+", value) if v]
    scope = frozenset(Scope(str(getattr(v, "value", v)).lower()) for v in value)
    if not scope:
        raise ValueError("scope must name at least one of " + ", ".join(s.value for s in Scope))
    return scope


def scope_label(scope: Iterable[Scope]) -> str:
    return "+".join(sorted(s.value for s in scope))


_ADJECTIVES = """amber brisk calm dusty eager fuzzy gentle hollow ivory jolly keen lunar
mellow nimble olive plain quiet rapid silver tidy umber vivid windy young zesty
bold coral dim faint grand hazy inky lucky misty noble proud rusty sunny""".split()
_NOUNS = """anchor badge cable dial ember falcon garnet harbor island jacket kettle
lantern meadow needle orchard pebble quarry ribbon saddle timber valley willow
yarrow zenith beacon candle drum feather glacier helmet""".split()
_VERBS = """adjust blend carry deliver emit fetch gather handle index judge kindle
launch mirror notify observe pack query render settle tally unfold verify weigh
weave trace align bundle compose draft""".split()


def _shape(words: list[str], old: str, kind: str, language: Language) -> str:
    """Join pool words in the naming style of ``old``."""
    if old.isupper() and len(old) > 1:
        return "_".join(w.upper() for w in words)
    if kind in ("class",) or old[:1].isupper():
        return "".join(w.capitalize() for w in words)
    if kind == "package":
        return "".join(words)
    if language is Language.JAVA:
        return words[0] + "".join(w.capitalize() for w in words[1:])
    return "_".join(words)


def _fresh(rng: random.Random, old: str, kind: str, language: Language) -> str:
    head = rng.choice(_VERBS) if kind == "method" else rng.choice(_ADJECTIVES)
    return _shape([head, rng.choice(_NOUNS)], old, kind, language)


# ---------------------------------------------------------------------- plan


@dataclass(frozen=True)
class RenamePlan:
    seed: int
    identifier_map: dict[str, str]
    literal_map: dict[str, str]
    scope: frozenset[Scope]
    attempts: int = 1  # generator attempts needed to avoid collisions

    def inverse(self) -> "RenamePlan":
        return RenamePlan(self.seed, {v: k for k, v in self.identifier_map.items()},
                          {v: k for k, v in self.literal_map.items()}, self.scope, self.attempts)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scope": sorted(s.value for s in self.scope),
            "identifier_map": dict(sorted(self.identifier_map.items())),
            "literal_map": dict(sorted(self.literal_map.items(), key=lambda kv: int(kv[0]))),
            "attempts": self.attempts,
        }

    @classmethod
    def from_dict(cls, d) -> "RenamePlan":
        return cls(int(d["seed"]), dict(d["identifier_map"]), dict(d["literal_map"]),
                   parse_scope(d["scope"]), int(d.get("attempts", 1)))


@dataclass(frozen=True)
class MetamorphicVariant:
    parent_id: str
    variant_id: str
    plan: RenamePlan
    case: BugCase
    verified: bool = False
    note: str = ""


# ------------------------------------------------------------------ analysis

_BACKTICKED = re.compile(r"`([^`]+)`")
_WORD = re.compile(r"[A-Za-z_$][\w$]*")
_DECIMAL = re.compile(r"^(?P<digits>[1-9]\d*)(?P<suffix>[lLuU]*)$")


def pinned_names(case: BugCase) -> set[str]:
    lang = case.language
    pinned = set(reserved_for(lang)) | set(case.pinned_identifiers) | PARAM_WORDS
    for span in _BACKTICKED.findall(case.ground_truth_reason.text):
        pinned.update(_WORD.findall(span))
    if lang is Language.PYTHON:
        # identifiers used inside f-strings live in string tokens we never edit
        for unit in case.units():
            for tok in tokenize(unit.text, lang):
                if tok.kind == STRING and "f" in tok.text[:2].lower():
                    pinned.update(_WORD.findall(tok.text))
    return pinned


def _case_declarations(case: BugCase) -> Declarations:
    decl = Declarations()
    for unit in case.units():
        decl.merge(declarations(unit.text, case.language))
    return decl


def rename_candidates(case: BugCase, scope: Iterable[Scope]) -> dict[str, str]:
    """Name -> kind for every renameable declared identifier in scope."""
    decl = _case_declarations(case)
    pinned = pinned_names(case)
    out: dict[str, str] = {}
    wanted = [
        (Scope.CLASSES, decl.classes, "class"),
        (Scope.METHODS, decl.methods, "method"),
        (Scope.VARIABLES, decl.variables, "variable"),
        (Scope.PACKAGES, decl.packages, "package"),
    ]
    for s, names, kind in wanted:
        if s in scope:
            for name in names:
                if name not in pinned and not name.startswith("__"):
                    out.setdefault(name, kind)
    return out


def _case_words(case: BugCase) -> set[str]:
    words: set[str] = set()
    for unit in case.units():
        words.update(_WORD.findall(unit.text))
        words.update(PurePosixPath(unit.path).parts)
        words.add(PurePosixPath(unit.path).stem)
    words.update(_WORD.findall(case.refactoring_params or ""))
    return words


def _literal_values(case: BugCase) -> tuple[list[int], set[int]]:
    """(remappable values, every integer value written anywhere)."""
    mappable: set[int] = set()
    present: set[int] = set()
    for unit in case.units():
        for tok in tokenize(unit.text, case.language):
            if tok.kind != NUMBER:
                continue
            m = _DECIMAL.match(tok.text)
            digits = re.match(r"\d+", tok.text)
            if digits:
                present.add(int(digits.group()))
            if m and int(m["digits"]) > 1:
                mappable.add(int(m["digits"]))
    present.update(int(x) for x in re.findall(r"\d+", case.ground_truth_reason.text))
    return sorted(mappable), present


def plan_literals(case: BugCase, rng: random.Random) -> dict[str, str]:
    """Strictly increasing remap of integer literals above 1 onto unused
    values, so every equality and ordering between them survives."""
    values, present = _literal_values(case)
    if not values:
        return {}
    lo, hi = LITERAL_RANGE
    hi = max(hi, 2 * max(values))
    pool = [v for v in range(lo, hi + 1) if v not in present]
    if len(pool) < len(values):
        raise RenameCollision(f"{case.id}: not enough unused integer values to remap literals")
    chosen = sorted(rng.sample(pool, len(values)))
    return {str(old): str(new) for old, new in zip(values, chosen)}


def make_plan(case: BugCase, seed: int, scope) -> RenamePlan:
    scope = parse_scope(scope)
    candidates = rename_candidates(case, scope)
    taken = _case_words(case) | set(reserved_for(case.language)) | PARAM_WORDS
    for attempt in range(MAX_ATTEMPTS):
        rng = random.Random(f"{seed}:{attempt}")
        mapping: dict[str, str] = {}
        used: set[str] = set()
        clash = False
        for old in sorted(candidates):
            new = _fresh(rng, old, candidates[old], case.language)
            if new in taken or new in used:
                clash = True
                break
            mapping[old] = new
            used.add(new)
        if clash:
            continue
        literals = plan_literals(case, rng) if Scope.NUMBERS in scope else {}
        return RenamePlan(seed, mapping, literals, scope, attempt + 1)
    raise RenameCollision(f"{case.id}: no collision-free renaming after {MAX_ATTEMPTS} attempts", seed=seed)


# --------------------------------------------------------------- rewriting


def rewrite_text(text: str, language, plan: RenamePlan) -> str:
    out = []
    for tok in tokenize(text, language):
        if tok.kind == IDENT and tok.text in plan.identifier_map:
            out.append(plan.identifier_map[tok.text])
        elif tok.kind == NUMBER and plan.literal_map:
            m = _DECIMAL.match(tok.text)
            if m and m["digits"] in plan.literal_map:
                out.append(plan.literal_map[m["digits"]] + m["suffix"])
            else:
                out.append(tok.text)
        else:
            out.append(tok.text)
    return "".join(out)


def rewrite_path(path: str, plan: RenamePlan) -> str:
    p = PurePosixPath(path)
    parts = list(p.parts)
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        stem = PurePosixPath(part).stem if last else part
        if stem in plan.identifier_map:
            suffix = PurePosixPath(part).suffix if last else ""
            parts[i] = plan.identifier_map[stem] + suffix
    return str(PurePosixPath(*parts))


def rewrite_params(params: str | None, plan: RenamePlan) -> str | None:
    if params is None:
        return None
    return _WORD.sub(lambda m: plan.identifier_map.get(m.group(), m.group()), params)


def _rewrite_reason_numbers(text: str, plan: RenamePlan) -> str:
    if not plan.literal_map:
        return text
    return re.sub(r"(?<!\w)(?<!\d\.)\d+(?!\w)(?!\.\d)", lambda m: plan.literal_map.get(m.group(), m.group()), text)


def apply_plan(case: BugCase, plan: RenamePlan, new_id: str | None = None) -> BugCase:
    lang = case.language

    def units(us):
        if us is None:
            return None
        return [SourceUnit(rewrite_path(u.path, plan), rewrite_text(u.text, lang, plan)) for u in us]

    reason = GroundTruthReason(case.ground_truth_reason.category,
                               _rewrite_reason_numbers(case.ground_truth_reason.text, plan))
    out = case.with_sources(units(case.before), units(case.after), rewrite_params(case.refactoring_params, plan))
    return replace(out, id=new_id or case.id, ground_truth_reason=reason)


def variant_id(parent_id: str, seed: int, scope) -> str:
    return f"{parent_id}--s{seed}-{scope_label(parse_scope(scope))}"


def generate_variant(case: BugCase, seed: int, scope) -> MetamorphicVariant:
    """Deterministic in (case, seed, scope)."""
    scope = parse_scope(scope)
    plan = make_plan(case, seed, scope)
    vid = variant_id(case.id, seed, scope)
    rewritten = apply_plan(case, plan, vid)
    rewritten = replace(rewritten, provenance=f"metamorphic variant of {case.id}; seed {seed}; scope {scope_label(scope)}")
    return MetamorphicVariant(case.id, vid, plan, rewritten)


def invert_variant(variant: MetamorphicVariant, parent: BugCase) -> BugCase:
    """Apply the inverse plan; the result should equal ``parent``."""
    back = apply_plan(variant.case, variant.plan.inverse(), parent.id)
    return replace(back, provenance=parent.provenance)


# -------------------------------------------------------------- verification


def verify_variant(variant: MetamorphicVariant, parent: BugCase, workspace,
                   checkers: CheckerConfig | None = None) -> MetamorphicVariant:
    """Verified iff the compile oracle gives the variant the same statuses
    as the parent (before program, and after program for Type I)."""
    workspace = Path(workspace)
    sides = ["before"] + (["after"] if parent.after else [])
    notes = []
    same = True
    for side in sides:
        want = check_static(parent.language, getattr(parent, side), workspace / "parent" / side, checkers).ok
        got = check_static(parent.language, getattr(variant.case, side), workspace / "variant" / side, checkers).ok
        notes.append(f"{side}: parent {'ok' if want else 'fails'}, variant {'ok' if got else 'fails'}")
        same = same and want == got
    return replace(variant, verified=same, note="; ".join(notes))


# ---------------------------------------------------------------- storage


def write_variant(variant: MetamorphicVariant, root) -> Path:
    directory = Path(root) / "variants" / variant.parent_id
    path = write_case(variant.case, directory)
    plan_path = directory / "plan.json"
    plans = json.loads(plan_path.read_text(encoding="utf-8")) if plan_path.exists() else {}
    entry = variant.plan.to_dict()
    entry["verified"] = variant.verified
    if variant.note:
        entry["note"] = variant.note
    plans[variant.variant_id] = entry
    tmp = plan_path.with_suffix(".tmp")
    tmp.write_text(json.dumps(dict(sorted(plans.items())), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, plan_path)
    return path


def load_variants(root, only_verified: bool = True) -> tuple[dict[str, str], list[BugCase]]:
    """Variant cases under ``root/variants``; returns (variant id -> parent
    id, cases). Unverified variants are skipped unless asked for."""
    base = Path(root) / "variants"
    parents: dict[str, str] = {}
    cases: list[BugCase] = []
    if not base.is_dir():
        return parents, cases
    for directory in sorted(p for p in base.iterdir() if p.is_dir()):
        plan_path = directory / "plan.json"
        plans: Mapping = json.loads(plan_path.read_text(encoding="utf-8")) if plan_path.exists() else {}
        for case in load_corpus(directory):
            if only_verified and not plans.get(case.id, {}).get("verified", False):
                continue
            parents[case.id] = directory.name
            cases.append(case)
    return parents, cases
