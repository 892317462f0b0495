"""Harness for testing language models as refactoring-bug detectors.

Typical flow: load a corpus, render prompts, query backends through the
gateway, parse verdicts, judge them with compile and mechanics oracles plus
human review, then score with pass@k and consistency@k.
"""

from .corpus import BugCase, BugKind, CorpusIndex, Language, SourceUnit, filter_cases, load_corpus, validate_case
from .gateway import AttemptRecord, BackendProfile, Gateway, RateCard, cost_summary
from .metrics import CorrectnessMatrix, consistency_at_k, pass_at_k
from .prompts import PromptInstance, PromptKind, render, render_type1, render_type2
from .verdicts import Verdict, VerdictDecision, parse

__version__ = "0.1.0"

__all__ = [
    "AttemptRecord", "BackendProfile", "BugCase", "BugKind", "CorpusIndex", "CorrectnessMatrix", "Gateway",
    "Language", "PromptInstance", "PromptKind", "RateCard", "SourceUnit", "Verdict", "VerdictDecision",
    "consistency_at_k", "cost_summary", "filter_cases", "load_corpus", "parse", "pass_at_k", "render",
    "render_type1", "render_type2", "validate_case",
]
