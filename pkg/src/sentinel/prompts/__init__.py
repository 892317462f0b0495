"""Zero-shot prompt rendering from golden template assets.

The template files are the source of truth; rendering is single-pass
placeholder substitution so that braces inside program text are never
re-interpreted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import lru_cache
from importlib import resources

from ..corpus import BugCase, BugKind
from ..errors import WrongKind

_PLACEHOLDER = re.compile(r"\{(code1|code2|code|name|params)\}")


class PromptKind(str, Enum):
    TYPE1_CHECK = "type1_check"
    TYPE2_APPLY = "type2_apply"


@dataclass(frozen=True)
class PromptInstance:
    case_id: str
    kind: PromptKind
    text: str
    rendered_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc), compare=False)


@lru_cache(maxsize=None)
def template(kind: PromptKind | str) -> str:
    kind = PromptKind(kind)
    name = "type1.prompt.txt" if kind is PromptKind.TYPE1_CHECK else "type2.prompt.txt"
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def fill(template_text: str, values: dict[str, str]) -> str:
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template_text)


def flatten_units(units, language) -> str:
    """Join units into one code block. A lone unit is emitted as-is; several
    get a ``<comment> file: <path>`` header line each, in corpus order."""
    units = list(units)
    if len(units) == 1:
        return units[0].text.rstrip("\n")
    prefix = language.comment_prefix
    return "\n".join(f"{prefix} file: {u.path}\n{u.text.rstrip(chr(10))}" for u in units)


def prompt_kind_for(case: BugCase) -> PromptKind:
    return PromptKind.TYPE1_CHECK if case.bug_kind.is_type1 else PromptKind.TYPE2_APPLY


def render_type1(case: BugCase) -> PromptInstance:
    if not case.bug_kind.is_type1:
        raise WrongKind(f"{case.id} is {case.bug_kind.value}; the Type I prompt needs a Type I case")
    if not case.after:
        raise WrongKind(f"{case.id} has no refactored program to compare against")
    text = fill(template(PromptKind.TYPE1_CHECK), {
        "code1": flatten_units(case.before, case.language),
        "code2": flatten_units(case.after, case.language),
    })
    return PromptInstance(case.id, PromptKind.TYPE1_CHECK, text)


def render_type2(case: BugCase) -> PromptInstance:
    if case.bug_kind is not BugKind.TYPE2_BLOCKED_VALID:
        raise WrongKind(f"{case.id} is {case.bug_kind.value}; the Type II prompt needs a Type II case")
    text = fill(template(PromptKind.TYPE2_APPLY), {
        "name": case.refactoring_kind,
        "params": case.refactoring_params or "",
        "code": flatten_units(case.before, case.language),
    })
    return PromptInstance(case.id, PromptKind.TYPE2_APPLY, text)


def render(case: BugCase) -> PromptInstance:
    return render_type1(case) if case.bug_kind.is_type1 else render_type2(case)


__all__ = [
    "PromptInstance", "PromptKind", "fill", "flatten_units", "prompt_kind_for",
    "render", "render_type1", "render_type2", "template",
]
