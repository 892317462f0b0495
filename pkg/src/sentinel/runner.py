"""Experiment orchestration: config, run directories, the attempt grid,
adjudication and reports.

A run directory looks like::

    config.json           snapshot of the run configuration (never rewritten)
    cases/                the exact case documents the run scored
    cohorts.json          variant id -> parent id
    attempts/<digest>.json    one AttemptRecord per request
    outcomes/<digest>.json    verdict plus initial judgment per attempt
    failures/<digest>.json    last error for items that could not finish
    adjudications.jsonl   append-only review ledger
    reports/              generated by ``report``

Every file is written atomically and only after the stage that produces it
has finished, so any prefix of a run is a valid state to resume from.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import shutil
import sys
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import (
    DEFAULT_LOC_CAP,
    BugCase,
    CaseSelector,
    builtin_corpus_root,
    filter_cases,
    load_corpus,
    read_case,
    write_case,
)
from .errors import (
    AlreadyAdjudicated,
    ConfigError,
    CorpusError,
    MetricsError,
    ReviewError,
    SentinelError,
    UnknownTriple,
)
from .gateway import (
    AttemptRecord,
    BackendProfile,
    CostGrouping,
    Gateway,
    RateCard,
    cost_summary,
    normalize_temperature,
    request_digest,
)
from .metamorph import load_variants
from .metrics import (
    CorrectnessMatrix,
    RateRow,
    consistency_at_k,
    detection_table,
    fmt_pct,
    fmt_temperature,
    incorrect_explanation_table,
    pass_at_k,
    union_table,
)
from .oracles import (
    Adjudication,
    AdjudicationLedger,
    CaseOutcome,
    CheckerConfig,
    apply_adjudication,
    judge_type1,
    judge_type2,
    needs_review,
    suggest_label,
)
from .prompts import render
from .verdicts import Verdict, parse

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_ITEM_FAILURES = 2

REPORT_FORMATS = ("csv", "json", "md")
UNION_BACKEND = "union-of-models"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# -------------------------------------------------------------------- config


@dataclass
class RunConfig:
    backends: list[BackendProfile]
    output_dir: Path
    corpus_root: Path = field(default_factory=builtin_corpus_root)
    selector: CaseSelector = field(default_factory=CaseSelector)
    k: int = 1
    temperatures: list[float] | None = None  # None: each backend's default
    include_variants: bool = False
    variants_root: Path | None = None
    concurrency: int = 4
    checkers: CheckerConfig = field(default_factory=CheckerConfig)
    loc_cap: int = DEFAULT_LOC_CAP

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("run.k must be >= 1")
        if self.temperatures is not None:
            if not self.temperatures:
                raise ConfigError("run.temperatures must not be empty")
            for t in self.temperatures:
                if not 0.0 <= float(t) <= 1.0:
                    raise ConfigError(f"temperature {t} outside [0, 1]")
            keys = [normalize_temperature(t) for t in self.temperatures]
            if len(set(keys)) != len(keys):
                raise ConfigError("run.temperatures has duplicates")
        if not self.backends:
            raise ConfigError("at least one [[backends]] entry is required")
        names = [b.name for b in self.backends]
        if len(set(names)) != len(names):
            raise ConfigError("backend names must be unique")
        if self.concurrency < 1:
            raise ConfigError("run.concurrency must be >= 1")

    def temperatures_for(self, profile: BackendProfile) -> list[float]:
        if self.temperatures is None:
            return [float(profile.default_temperature)]
        return [float(t) for t in self.temperatures]

    def snapshot(self) -> dict:
        """Everything that decides what a run computes. The output location
        and the worker count are deliberately left out."""
        return {
            "corpus": {
                "root": str(self.corpus_root),
                "loc_cap": self.loc_cap,
                "select": _selector_dict(self.selector),
                "include_variants": self.include_variants,
                "variants_root": None if self.variants_root is None else str(self.variants_root),
            },
            "backends": [_profile_dict(b) for b in self.backends],
            "run": {"k": self.k, "temperatures": self.temperatures},
            "checkers": {
                "commands": {lang.value: cmd for lang, cmd in sorted(self.checkers.commands.items())},
                "typecheck_cmd": self.checkers.typecheck_cmd,
                "timeout_secs": self.checkers.timeout_secs,
            },
        }


def _selector_dict(sel: CaseSelector) -> dict:
    out = {}
    if sel.languages is not None:
        out["languages"] = sorted(x.value for x in sel.languages)
    if sel.bug_kinds is not None:
        out["bug_kinds"] = sorted(x.value for x in sel.bug_kinds)
    if sel.refactoring_kinds is not None:
        out["refactoring_kinds"] = sorted(sel.refactoring_kinds)
    if sel.ids is not None:
        out["ids"] = list(sel.ids)
    return out


def _profile_dict(p: BackendProfile) -> dict:
    return {
        "name": p.name,
        "endpoint_url": p.endpoint_url,
        "model_id": p.model_id,
        "api_flavor": p.api_flavor.value,
        "default_temperature": p.default_temperature,
        "auth_token_env": p.auth_token_env,
        "input_cost_per_1k_tokens": str(p.rate_card.input_cost_per_1k_tokens),
        "output_cost_per_1k_tokens": str(p.rate_card.output_cost_per_1k_tokens),
        "max_retries": p.max_retries,
        "timeout": p.timeout,
        "max_in_flight": p.max_in_flight,
        "script": p.script,
    }


def _resolve(base: Path, value) -> Path:
    p = Path(value).expanduser()
    return p if p.is_absolute() else (base / p).resolve()


def config_from_mapping(doc: Mapping, base_dir: Path) -> RunConfig:
    doc = dict(doc)
    corpus = dict(doc.pop("corpus", {}))
    run = dict(doc.pop("run", {}))
    backends = doc.pop("backends", [])
    checkers = doc.pop("checkers", {})
    if doc:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(doc))}")
    try:
        profiles = [BackendProfile.from_mapping(b, base_dir) for b in backends]
        selector = CaseSelector.from_mapping(corpus.pop("select", None))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    root = _resolve(base_dir, corpus.pop("root")) if "root" in corpus else builtin_corpus_root()
    variants_root = corpus.pop("variants_root", None)
    cfg = RunConfig(
        backends=profiles,
        output_dir=_resolve(base_dir, run.pop("output_dir", "runs/latest")),
        corpus_root=root,
        selector=selector,
        k=int(run.pop("k", 1)),
        temperatures=run.pop("temperatures", None),
        include_variants=bool(corpus.pop("include_variants", False)),
        variants_root=None if variants_root is None else _resolve(base_dir, variants_root),
        concurrency=int(run.pop("concurrency", 4)),
        checkers=CheckerConfig.from_mapping(checkers),
        loc_cap=int(corpus.pop("loc_cap", DEFAULT_LOC_CAP)),
    )
    leftovers = [f"corpus.{k}" for k in corpus] + [f"run.{k}" for k in run]
    if leftovers:
        raise ConfigError(f"unknown config keys: {', '.join(leftovers)}")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_mapping(doc, path.parent.resolve())


# ------------------------------------------------------------ run directory


class RunDirectory:
    def __init__(self, root):
        self.root = Path(root)

    config_path = property(lambda self: self.root / "config.json")
    cases_dir = property(lambda self: self.root / "cases")
    cohorts_path = property(lambda self: self.root / "cohorts.json")
    attempts_dir = property(lambda self: self.root / "attempts")
    outcomes_dir = property(lambda self: self.root / "outcomes")
    failures_dir = property(lambda self: self.root / "failures")
    scratch_dir = property(lambda self: self.root / ".scratch")
    reports_dir = property(lambda self: self.root / "reports")

    @property
    def ledger(self) -> AdjudicationLedger:
        return AdjudicationLedger(self.root / "adjudications.jsonl")

    def exists(self) -> bool:
        return self.config_path.exists()

    def snapshot(self) -> dict:
        return json.loads(self.config_path.read_text(encoding="utf-8"))

    def initialize(self, config: RunConfig, cases: Iterable[BugCase], cohorts: Mapping[str, str]) -> None:
        snap = config.snapshot()
        if self.exists():
            if self.snapshot() != snap:
                raise ConfigError(f"{self.root} was created with a different configuration; "
                                  "use a fresh output directory")
        else:
            _atomic_write(self.config_path, _dump(snap))
        for case in cases:
            if not (self.cases_dir / f"{case.id}.case.json").exists():
                write_case(case, self.cases_dir)
        if not self.cohorts_path.exists():
            _atomic_write(self.cohorts_path, _dump(dict(sorted(cohorts.items()))))
        for d in (self.attempts_dir, self.outcomes_dir):
            d.mkdir(parents=True, exist_ok=True)

    def cases(self) -> dict[str, BugCase]:
        return {c.id: c for c in (read_case(p) for p in sorted(self.cases_dir.glob("*.case.json")))}

    def cohorts(self) -> dict[str, str]:
        """case id -> "original" | "variant"."""
        parents = json.loads(self.cohorts_path.read_text(encoding="utf-8")) if self.cohorts_path.exists() else {}
        return {cid: ("variant" if cid in parents else "original") for cid in self.cases()}

    def rate_cards(self) -> dict[str, RateCard]:
        return {b["name"]: RateCard(Decimal(b["input_cost_per_1k_tokens"]), Decimal(b["output_cost_per_1k_tokens"]))
                for b in self.snapshot()["backends"]}

    def attempt_records(self) -> list[AttemptRecord]:
        out = []
        for p in sorted(self.attempts_dir.glob("*.json")):
            out.append(AttemptRecord.from_dict(json.loads(p.read_text(encoding="utf-8"))))
        return out

    def outcome_docs(self) -> list[dict]:
        return [json.loads(p.read_text(encoding="utf-8")) for p in sorted(self.outcomes_dir.glob("*.json"))]

    def effective_outcomes(self) -> list[tuple[dict, CaseOutcome]]:
        """Initial judgments replayed against the adjudication ledger (the
        latest entry for an attempt wins)."""
        cases = self.cases()
        entries = list(self.ledger)
        out = []
        for doc in self.outcome_docs():
            outcome = CaseOutcome.from_dict(doc["outcome"])
            case = cases[outcome.case_id]
            if needs_review(case, outcome):
                adj = self.ledger.latest_for(outcome.case_id, outcome.backend_name, outcome.attempt_index,
                                             outcome.temperature, entries)
                outcome = apply_adjudication(case, outcome, adj)
            out.append((doc, outcome))
        out.sort(key=lambda pair: _outcome_sort_key(pair[1]))
        return out


def _outcome_sort_key(o: CaseOutcome):
    return (o.backend_name, o.temperature if o.temperature is not None else -1.0, o.case_id, o.attempt_index)


# ---------------------------------------------------------------------- run


@dataclass
class RunSummary:
    run_dir: Path
    items: int = 0
    decided: int = 0
    pending: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_ITEM_FAILURES if self.failed else EXIT_OK

    def describe(self) -> str:
        return (f"{self.items} attempts: {self.decided} decided, {self.pending} pending adjudication, "
                f"{self.failed} failed ({self.run_dir})")


@dataclass(frozen=True)
class WorkItem:
    case: BugCase
    backend: BackendProfile
    temperature: float
    attempt_index: int


def select_cases(config: RunConfig) -> tuple[list[BugCase], dict[str, str]]:
    index = load_corpus(config.corpus_root, loc_cap=config.loc_cap)
    if index.problems:
        first = index.problems[0]
        raise CorpusError(f"{len(index.problems)} malformed case(s) in {config.corpus_root}; "
                          f"first: {first.case_id} {first.code} ({first.field}): {first.reason}")
    selected = filter_cases(index, config.selector)
    cases = list(selected.cases)
    cohorts: dict[str, str] = {}
    if config.include_variants:
        parents, variants = load_variants(config.variants_root or config.corpus_root)
        chosen = set(selected.ids())
        for v in variants:
            if parents[v.id] in chosen:
                cases.append(v)
                cohorts[v.id] = parents[v.id]
    return cases, cohorts


def work_items(config: RunConfig, cases: Iterable[BugCase]) -> list[WorkItem]:
    items = []
    for backend in config.backends:
        for t in config.temperatures_for(backend):
            for case in cases:
                for i in range(1, config.k + 1):
                    items.append(WorkItem(case, backend, t, i))
    return items


class Runner:
    def __init__(self, config: RunConfig, gateway: Gateway | None = None):
        self.config = config
        self.dir = RunDirectory(config.output_dir)
        self._own_gateway = gateway is None
        self.gateway = gateway or Gateway(self.dir.attempts_dir)

    def run(self) -> RunSummary:
        cases, cohorts = select_cases(self.config)
        self.dir.initialize(self.config, cases, cohorts)
        items = work_items(self.config, cases)
        summary = RunSummary(self.dir.root, items=len(items))
        try:
            with ThreadPoolExecutor(max_workers=self.config.concurrency) as pool:
                for item, result in zip(items, pool.map(self._safe_process, items)):
                    if isinstance(result, Exception):
                        summary.failed += 1
                        summary.failures.append(f"{item.case.id}/{item.backend.name}/{item.attempt_index}: {result}")
                    elif result.pending:
                        summary.pending += 1
                    else:
                        summary.decided += 1
        finally:
            if self._own_gateway:
                self.gateway.close()
        shutil.rmtree(self.dir.scratch_dir, ignore_errors=True)
        log.info(summary.describe())
        return summary

    def _safe_process(self, item: WorkItem):
        try:
            return self.process(item)
        except SentinelError as exc:
            self._record_failure(item, exc)
            return exc

    def _digest(self, item: WorkItem, prompt_text: str) -> str:
        return request_digest(item.backend.name, item.backend.model_id, prompt_text, item.temperature,
                              item.attempt_index)

    def _record_failure(self, item: WorkItem, exc: Exception) -> None:
        prompt = render(item.case)
        digest = self._digest(item, prompt.text)
        _atomic_write(self.dir.failures_dir / f"{digest}.json", _dump({
            "case_id": item.case.id,
            "backend_name": item.backend.name,
            "attempt_index": item.attempt_index,
            "temperature": item.temperature,
            "error": str(exc),
        }))
        log.warning("%s/%s attempt %d failed: %s", item.case.id, item.backend.name, item.attempt_index, exc)

    def process(self, item: WorkItem) -> CaseOutcome:
        prompt = render(item.case)
        digest = self._digest(item, prompt.text)
        outcome_path = self.dir.outcomes_dir / f"{digest}.json"
        if outcome_path.exists():
            return CaseOutcome.from_dict(json.loads(outcome_path.read_text(encoding="utf-8"))["outcome"])
        record = self.gateway.complete(item.backend, prompt, item.temperature, item.attempt_index)
        verdict = parse(record.raw_response, prompt.kind)
        if item.case.is_type1:
            outcome = judge_type1(item.case, verdict, None, item.backend.name, item.attempt_index, item.temperature)
        else:
            workspace = self.dir.scratch_dir / digest
            try:
                outcome = judge_type2(item.case, verdict, workspace, self.config.checkers,
                                      item.backend.name, item.attempt_index, item.temperature)
            finally:
                shutil.rmtree(workspace, ignore_errors=True)
        _atomic_write(outcome_path, _dump({
            "request_digest": digest,
            "verdict": verdict.to_dict(),
            "outcome": outcome.to_dict(timings=False),
        }))
        stale = self.dir.failures_dir / f"{digest}.json"
        if stale.exists():
            stale.unlink()
        return outcome


def run(config: RunConfig, gateway: Gateway | None = None) -> RunSummary:
    return Runner(config, gateway).run()


# -------------------------------------------------------------------- review


@dataclass(frozen=True)
class Triple:
    case_id: str
    backend_name: str
    attempt_index: int
    temperature: float | None = None

    @classmethod
    def parse(cls, text: str) -> "Triple":
        """``case/backend/attempt`` with an optional ``@temperature``."""
        body, _, temp = text.partition("@")
        parts = body.split("/")
        if len(parts) != 3:
            raise UnknownTriple(f"expected case/backend/attempt[@temperature], got {text!r}")
        try:
            attempt = int(parts[2])
            t = float(temp) if temp else None
        except ValueError:
            raise UnknownTriple(f"bad attempt or temperature in {text!r}") from None
        return cls(parts[0], parts[1], attempt, t)

    def __str__(self) -> str:
        base = f"{self.case_id}/{self.backend_name}/{self.attempt_index}"
        return base if self.temperature is None else f"{base}@{fmt_temperature(self.temperature)}"


@dataclass(frozen=True)
class ReviewItem:
    triple: Triple
    outcome: CaseOutcome
    verdict: Verdict
    case: BugCase

    def render(self) -> str:
        hint = suggest_label(self.case, self.verdict)
        label = {True: "looks correct", False: "looks wrong", None: "no cue"}[hint.label]
        cues = f" ({', '.join(hint.matched)})" if hint.matched else ""
        body = self.verdict.body.strip() or "<empty>"
        return "\n".join([
            f"== {self.triple}",
            f"ground truth [{self.case.ground_truth_reason.category.value}]: {self.case.ground_truth_reason.text}",
            f"pre-label: {label}{cues}",
            "model explanation:",
            *("  " + line for line in body.splitlines()),
        ])


def _multi_temperature(outcomes: Iterable[CaseOutcome]) -> bool:
    return len({o.temperature for o in outcomes}) > 1


def review_items(run_dir, include_decided: bool = False) -> list[ReviewItem]:
    rd = RunDirectory(run_dir)
    cases = rd.cases()
    pairs = rd.effective_outcomes()
    with_temp = _multi_temperature(o for _, o in pairs)
    items = []
    for doc, outcome in pairs:
        case = cases[outcome.case_id]
        if not needs_review(case, outcome) or (not outcome.pending and not include_decided):
            continue
        triple = Triple(outcome.case_id, outcome.backend_name, outcome.attempt_index,
                        outcome.temperature if with_temp else None)
        items.append(ReviewItem(triple, outcome, Verdict.from_dict(doc["verdict"]), case))
    return items


def review_set(run_dir, triple: Triple | str, correct: bool, notes: str = "", reviewer: str = "",
               force: bool = False, timestamp: str | None = None) -> CaseOutcome:
    """Record a review for one attempt and return its re-judged outcome."""
    rd = RunDirectory(run_dir)
    if isinstance(triple, str):
        triple = Triple.parse(triple)
    cases = rd.cases()
    matches = [(doc, o) for doc, o in rd.effective_outcomes()
               if (o.case_id, o.backend_name, o.attempt_index) == (triple.case_id, triple.backend_name, triple.attempt_index)
               and (triple.temperature is None or fmt_temperature(o.temperature) == fmt_temperature(triple.temperature))]
    if not matches:
        raise UnknownTriple(f"no attempt {triple} in {rd.root}")
    if len(matches) > 1:
        raise UnknownTriple(f"{triple} matches several temperatures; add @temperature")
    _, outcome = matches[0]
    case = cases[outcome.case_id]
    if not needs_review(case, outcome):
        raise ReviewError(f"{triple} is not a Type I NO answer; nothing to adjudicate")
    if outcome.evidence.adjudication is not None and not force:
        raise AlreadyAdjudicated(f"{triple} already reviewed; pass --force to override (both entries are kept)")
    kwargs = {} if timestamp is None else {"timestamp": timestamp}
    adj = Adjudication(outcome.case_id, outcome.backend_name, outcome.attempt_index, correct, notes, reviewer,
                       temperature=outcome.temperature, **kwargs)
    rd.ledger.append(adj)
    return apply_adjudication(case, outcome, adj)


# -------------------------------------------------------------------- report


@dataclass
class Slice:
    backend: str
    temperature: float | None
    cohort: str
    bug_type: str  # TYPE1, TYPE2 or ALL (case-weighted over both)
    outcomes: list[CaseOutcome]

    @property
    def key(self):
        return (self.backend, self.temperature if self.temperature is not None else -1.0, self.cohort,
                {"TYPE1": 0, "TYPE2": 1, "ALL": 2}[self.bug_type])


def _slices(outcomes: list[CaseOutcome], cases: Mapping[str, BugCase], cohorts: Mapping[str, str]) -> list[Slice]:
    groups: dict[tuple, list[CaseOutcome]] = defaultdict(list)
    for o in outcomes:
        bug_type = cases[o.case_id].bug_kind.bug_type
        base = (o.backend_name, o.temperature, cohorts.get(o.case_id, "original"))
        groups[base + (bug_type,)].append(o)
        groups[base + ("ALL",)].append(o)
    slices = [Slice(b, t, c, bt, os_) for (b, t, c, bt), os_ in groups.items()]
    return sorted(slices, key=lambda s: s.key)


def _status(pending: int) -> str:
    return f"partial: {pending} pending" if pending else "ok"


def _exact(value: Fraction | None):
    return None if value is None else f"{value.numerator}/{value.denominator}"


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _group_value(row: RateRow, dim: str) -> str:
    return dict(row.group).get(dim, "")


def build_report(run_dir) -> dict:
    """Every number the report files show, as one nested structure."""
    rd = RunDirectory(run_dir)
    cases = rd.cases()
    cohorts = rd.cohorts()
    outcomes = [o for _, o in rd.effective_outcomes()]
    dims = ("backend", "temperature", "cohort", "bug_type")

    slices = []
    for s in _slices(outcomes, cases, cohorts):
        entry = {
            "backend": s.backend, "temperature": fmt_temperature(s.temperature), "cohort": s.cohort,
            "bug_type": s.bug_type, "pass_at_k": [], "consistency_at_k": [],
        }
        try:
            matrix = CorrectnessMatrix.from_outcomes(s.outcomes)
        except MetricsError as exc:
            # attempts that failed to run leave holes in the matrix
            entry.update(n=len({o.case_id for o in s.outcomes}), k=0, pending=0, status=f"incomplete: {exc}")
            slices.append(entry)
            continue
        entry.update(n=matrix.n, k=matrix.k, pending=matrix.pending, status=_status(matrix.pending))
        if not matrix.pending and matrix.n:
            for k in range(1, matrix.k + 1):
                p, c = pass_at_k(matrix, k), consistency_at_k(matrix, k)
                entry["pass_at_k"].append({"k": k, "value": fmt_pct(p), "exact": _exact(p)})
                entry["consistency_at_k"].append({"k": k, "value": fmt_pct(c), "exact": _exact(c)})
        slices.append(entry)

    def rate_rows(rows: list[RateRow], backend_override: str | None = None):
        out = []
        for r in rows:
            out.append({
                "backend": backend_override or _group_value(r, "backend"),
                "temperature": _group_value(r, "temperature"),
                "cohort": _group_value(r, "cohort"),
                "bug_type": _group_value(r, "bug_type"),
                "numerator": r.numerator, "denominator": r.denominator, "pending": r.pending,
                "rate": fmt_pct(r.rate), "exact": _exact(r.rate), "status": _status(r.pending),
            })
        return out

    detection = rate_rows(detection_table(outcomes, cases, dims, cohorts))
    detection += rate_rows(union_table(outcomes, cases, dims, cohorts), UNION_BACKEND)
    explanation = rate_rows(incorrect_explanation_table(outcomes, cases, dims, cohorts))

    temperature = []
    for s in slices:
        if s["temperature"] == "":
            continue
        temperature.append({
            "backend": s["backend"], "cohort": s["cohort"], "bug_type": s["bug_type"],
            "temperature": s["temperature"],
            "pass_at_1": s["pass_at_k"][0]["value"] if s["pass_at_k"] else "",
            "status": s["status"],
        })
    temperature.sort(key=lambda r: (r["backend"], r["cohort"], r["bug_type"], float(r["temperature"])))

    records = rd.attempt_records()
    cards = rd.rate_cards()
    kinds = {cid: c.bug_kind for cid, c in cases.items()}
    cost = []
    for backend in sorted({r.backend_name for r in records}):
        mine = [r for r in records if r.backend_name == backend]
        totals = cost_summary(mine, cards, CostGrouping.TOTAL)
        by_kind = cost_summary(mine, cards, CostGrouping.BY_BUG_KIND, kinds)
        cost.append({"backend": backend, "group": "total", "cost": str(totals["total"])})
        cost.extend({"backend": backend, "group": g, "cost": str(v)} for g, v in by_kind.items())
    if records:
        grand = cost_summary(records, cards, CostGrouping.TOTAL)["total"]
        cost.append({"backend": "all", "group": "total", "cost": str(grand)})

    status = Counter(o.status.value for o in outcomes)
    return {
        "aggregation": "ALL rows are case-weighted means over Type I and Type II cases",
        "counts": {"attempts": len(outcomes), "decided": status.get("decided", 0),
                   "pending": status.get("pending_adjudication", 0)},
        "slices": slices,
        "detection_rates": detection,
        "incorrect_explanation_rates": explanation,
        "temperature": temperature,
        "cost": cost,
    }


def _summary_md(data: dict) -> str:
    c = data["counts"]
    lines = ["# Run summary", "",
             f"{c['attempts']} judged attempts: {c['decided']} decided, {c['pending']} pending adjudication.", "",
             "## Detection rates (attempt 1)", "",
             "| backend | temperature | cohort | bug type | correct | total | rate | status |",
             "|---|---|---|---|---|---|---|---|"]
    for r in data["detection_rates"]:
        lines.append(f"| {r['backend']} | {r['temperature']} | {r['cohort']} | {r['bug_type']} | "
                     f"{r['numerator']} | {r['denominator']} | {r['rate']} | {r['status']} |")
    lines += ["", "## Incorrect explanations or code (attempt 1)", "",
              "| backend | temperature | cohort | bug type | count | total | rate | status |",
              "|---|---|---|---|---|---|---|---|"]
    for r in data["incorrect_explanation_rates"]:
        lines.append(f"| {r['backend']} | {r['temperature']} | {r['cohort']} | {r['bug_type']} | "
                     f"{r['numerator']} | {r['denominator']} | {r['rate']} | {r['status']} |")
    lines += ["", "## pass@k / consistency@k", "", data["aggregation"] + ".", "",
              "| backend | temperature | cohort | bug type | k | pass@k | consistency@k | status |",
              "|---|---|---|---|---|---|---|---|"]
    for s in data["slices"]:
        if not s["pass_at_k"]:
            lines.append(f"| {s['backend']} | {s['temperature']} | {s['cohort']} | {s['bug_type']} | | | | {s['status']} |")
        for p, q in zip(s["pass_at_k"], s["consistency_at_k"]):
            lines.append(f"| {s['backend']} | {s['temperature']} | {s['cohort']} | {s['bug_type']} | {p['k']} | "
                         f"{p['value']} | {q['value']} | {s['status']} |")
    lines += ["", "## Cost", "", "| backend | group | cost |", "|---|---|---|"]
    lines += [f"| {r['backend']} | {r['group']} | {r['cost']} |" for r in data["cost"]]
    return "\n".join(lines) + "\n"


def report(run_dir, formats: Iterable[str] = REPORT_FORMATS) -> list[Path]:
    """Write report files; returns their paths. Deterministic for a fixed
    run directory."""
    formats = set(formats)
    unknown = formats - set(REPORT_FORMATS)
    if unknown:
        raise ConfigError(f"unknown report format(s): {', '.join(sorted(unknown))}")
    rd = RunDirectory(run_dir)
    if not rd.exists():
        raise ConfigError(f"{rd.root} is not a run directory")
    data = build_report(run_dir)
    out_dir = rd.reports_dir
    written: list[Path] = []

    def emit(name: str, text: str):
        path = out_dir / name
        _atomic_write(path, text)
        written.append(path)

    if "json" in formats:
        emit("metrics.json", _dump(data))
    if "csv" in formats:
        emit("detection_rates.csv", _csv(
            ["backend", "temperature", "cohort", "bug_type", "correct", "total", "detection_rate", "status"],
            [[r["backend"], r["temperature"], r["cohort"], r["bug_type"], r["numerator"], r["denominator"],
              r["rate"], r["status"]] for r in data["detection_rates"]]))
        emit("incorrect_explanation_rates.csv", _csv(
            ["backend", "temperature", "cohort", "bug_type", "count", "total", "rate", "status"],
            [[r["backend"], r["temperature"], r["cohort"], r["bug_type"], r["numerator"], r["denominator"],
              r["rate"], r["status"]] for r in data["incorrect_explanation_rates"]]))
        for metric in ("pass_at_k", "consistency_at_k"):
            rows = []
            for s in data["slices"]:
                if not s[metric]:
                    rows.append([s["backend"], s["temperature"], s["cohort"], s["bug_type"], s["n"], "", "",
                                 s["status"]])
                for point in s[metric]:
                    rows.append([s["backend"], s["temperature"], s["cohort"], s["bug_type"], s["n"], point["k"],
                                 point["value"], s["status"]])
            emit(f"{metric}.csv", _csv(["backend", "temperature", "cohort", "bug_type", "n", "k", metric, "status"],
                                       rows))
        emit("temperature.csv", _csv(
            ["backend", "cohort", "bug_type", "temperature", "pass_at_1", "status"],
            [[r["backend"], r["cohort"], r["bug_type"], r["temperature"], r["pass_at_1"], r["status"]]
             for r in data["temperature"]]))
        emit("cost.csv", _csv(["backend", "group", "cost"],
                              [[r["backend"], r["group"], r["cost"]] for r in data["cost"]]))
    if "md" in formats:
        emit("summary.md", _summary_md(data))
    return written
