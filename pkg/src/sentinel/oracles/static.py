"""Compile oracle: materialize units in a scratch directory and run an
external checker over them.

Checker commands are templates. ``{files}`` expands to every source file
(as separate arguments when it stands alone), ``{file}`` runs the command
once per file, ``{dir}`` is the workspace and ``{python}`` the running
interpreter.
"""

from __future__ import annotations

import os
import re
import shlex
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Mapping, Sequence

from ..corpus import Language, SourceUnit
from ..errors import CheckerNotFound, CheckerTimeout, ConfigError, WorkspaceIOError
from ..structure import java_top_level_types

DEFAULT_TIMEOUT = 30.0
JANINO_ENV = "SENTINEL_JANINO_CLASSPATH"
JANINO_MAIN = "org.codehaus.commons.compiler.samples.CompilerDemo"

DEFAULT_COMMANDS = {
    Language.JAVA: "javac -d {dir}/.classes {files}",
    Language.PYTHON: "{python} -m py_compile {file}",
    Language.C: "cc -fsyntax-only -pedantic-errors {files}",
}


@dataclass(frozen=True)
class Diagnostic:
    file: str | None
    line: int | None
    message: str

    def to_dict(self) -> dict:
        return {"file": self.file, "line": self.line, "message": self.message}


@dataclass(frozen=True)
class CompileResult:
    ok: bool
    diagnostics: tuple[Diagnostic, ...] = ()
    tool_invocation: str = ""
    duration: float = 0.0
    raw_output: str = ""

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "tool_invocation": self.tool_invocation,
            "duration": self.duration,
            "raw_output": self.raw_output,
        }

    @classmethod
    def from_dict(cls, d) -> "CompileResult":
        return cls(d["ok"], tuple(Diagnostic(**x) for x in d.get("diagnostics", ())),
                   d.get("tool_invocation", ""), d.get("duration", 0.0), d.get("raw_output", ""))


@dataclass
class CheckerConfig:
    commands: dict[Language, str] = field(default_factory=dict)
    typecheck_cmd: str | None = None  # optional second pass for Python
    timeout_secs: float = DEFAULT_TIMEOUT

    @classmethod
    def from_mapping(cls, raw: Mapping | None) -> "CheckerConfig":
        raw = dict(raw or {})
        cfg = cls(timeout_secs=float(raw.pop("timeout_secs", DEFAULT_TIMEOUT)))
        for lang in Language:
            section = raw.pop(lang.value, None)
            if section is None:
                continue
            if isinstance(section, str):
                section = {"cmd": section}
            if "cmd" in section:
                cfg.commands[lang] = section["cmd"]
            if lang is Language.PYTHON and "typecheck_cmd" in section:
                cfg.typecheck_cmd = section["typecheck_cmd"]
        if raw:
            raise ConfigError(f"unknown checker keys: {', '.join(sorted(raw))}")
        if cfg.timeout_secs <= 0:
            raise ConfigError("checkers.timeout_secs must be positive")
        return cfg


def _find_java() -> str | None:
    java = shutil.which("java")
    if java:
        return java
    try:
        import jdk4py  # optional; ships a headless runtime
    except ImportError:
        return None
    candidate = Path(jdk4py.JAVA)
    return str(candidate) if candidate.exists() else None


def resolve_command(language: Language, config: CheckerConfig | None = None) -> str:
    """Pick the checker template for ``language``.

    Java falls back to the Janino compiler when no javac is installed and
    ``SENTINEL_JANINO_CLASSPATH`` points at its jars. Janino is more lenient
    than javac on a few constructs, so javac is always preferred.
    """
    config = config or CheckerConfig()
    if language in config.commands:
        return config.commands[language]
    if language is Language.JAVA and not shutil.which("javac"):
        classpath = os.environ.get(JANINO_ENV)
        java = _find_java()
        if classpath and java:
            return f"{shlex.quote(java)} -cp {shlex.quote(classpath)} {JANINO_MAIN} -d {{dir}}/.classes {{files}}"
        raise CheckerNotFound("no javac on PATH and no Janino fallback configured", language="java")
    return DEFAULT_COMMANDS[language]


# ----------------------------------------------------------- materializing


def _safe_relpath(path: str) -> PurePosixPath:
    p = PurePosixPath(path.replace("\\", "/"))
    if p.is_absolute() or ".." in p.parts or not p.parts:
        raise WorkspaceIOError(f"refusing to write outside the workspace: {path!r}")
    return p


def _java_files(unit: SourceUnit, index: int) -> list[tuple[PurePosixPath, str]]:
    """One file per top-level type so that every public type sits in a file
    of its own name. Each file is padded with blank lines so that line
    numbers in diagnostics match the original unit."""
    header, segments = java_top_level_types(unit.text)
    if len(segments) <= 1:
        path = _safe_relpath(unit.path)
        if path.suffix != ".java":
            name = segments[0].name if segments else path.name
            path = path.with_name(f"{name}.java")
        return [(path, unit.text)]
    parent = _safe_relpath(unit.path).parent / f"u{index}"
    header_lines = header.count("\n")
    out = []
    for seg in segments:
        pad = "\n" * max(0, seg.first_line - 1 - header_lines)
        out.append((parent / f"{seg.name}.java", header + pad + unit.text[seg.start:seg.end]))
    return out


def materialize(language: Language, units: Sequence[SourceUnit], workspace: Path) -> dict[str, str]:
    """Write units under ``workspace``; return generated relative path ->
    original unit path."""
    mapping: dict[str, str] = {}
    try:
        workspace.mkdir(parents=True, exist_ok=True)
        (workspace / ".classes").mkdir(exist_ok=True)
        for i, unit in enumerate(units, 1):
            if language is Language.JAVA:
                files = _java_files(unit, i)
            else:
                path = _safe_relpath(unit.path)
                if not path.suffix:
                    path = path.with_name(path.name + language.extension)
                files = [(path, unit.text)]
            for rel, text in files:
                target = workspace / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(text, encoding="utf-8")
                mapping[rel.as_posix()] = unit.path
    except OSError as exc:
        raise WorkspaceIOError(f"cannot materialize sources in {workspace}: {exc}") from exc
    return mapping


# -------------------------------------------------------------- diagnostics

_GCC_LIKE = re.compile(r"^(?P<file>[^\s:][^:\n]*):(?P<line>\d+):(?:\d+:)?\s*(?:fatal )?error:\s*(?P<msg>.*)$", re.M)
_JANINO = re.compile(r"File '(?P<file>[^']+)', Line (?P<line>\d+), Column \d+: (?P<msg>.*)")
_PY_LOC = re.compile(r'^\s*File "(?P<file>[^"]+)", line (?P<line>\d+)', re.M)
_PY_ERR = re.compile(r"^(?P<kind>\w*(?:Error|Exception)): ?(?P<msg>.*)$", re.M)


def _map_file(name: str, mapping: Mapping[str, str], workspace: Path) -> str:
    p = name.replace("\\", "/")
    ws = workspace.as_posix().rstrip("/") + "/"
    if p.startswith(ws):
        p = p[len(ws):]
    if p.startswith("./"):
        p = p[2:]
    if p in mapping:
        return mapping[p]
    for rel, orig in mapping.items():
        if rel.endswith("/" + p) or p.endswith("/" + rel):
            return orig
    return name


def parse_diagnostics(output: str, mapping: Mapping[str, str], workspace: Path) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for m in _JANINO.finditer(output):
        diags.append(Diagnostic(_map_file(m["file"], mapping, workspace), int(m["line"]), m["msg"].strip()))
    for m in _GCC_LIKE.finditer(output):
        diags.append(Diagnostic(_map_file(m["file"], mapping, workspace), int(m["line"]), m["msg"].strip()))
    locs = list(_PY_LOC.finditer(output))
    for i, loc in enumerate(locs):
        nxt = locs[i + 1].start() if i + 1 < len(locs) else len(output)
        err = _PY_ERR.search(output, loc.end(), nxt)
        if err or i == len(locs) - 1:
            msg = f"{err['kind']}: {err['msg']}" if err else output[loc.end():nxt].strip()
            diags.append(Diagnostic(_map_file(loc["file"], mapping, workspace), int(loc["line"]), msg.strip()))
    return diags


# -------------------------------------------------------------------- runner


def _expand(template: str, workspace: Path, files: list[str], one_file: str | None = None) -> list[str]:
    args: list[str] = []
    for tok in shlex.split(template):
        if tok == "{files}":
            args.extend(files)
            continue
        tok = (tok.replace("{dir}", str(workspace))
                  .replace("{python}", sys.executable)
                  .replace("{files}", " ".join(files)))
        if one_file is not None:
            tok = tok.replace("{file}", one_file)
        args.append(tok)
    return args


def _run(args: list[str], workspace: Path, timeout: float) -> tuple[int, str]:
    if not args or (shutil.which(args[0]) is None and not Path(args[0]).exists()):
        raise CheckerNotFound(f"checker executable not found: {args[0] if args else '<empty>'}")
    try:
        proc = subprocess.run(args, cwd=workspace, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise CheckerTimeout(f"{args[0]} exceeded {timeout:g}s", timeout=timeout) from None
    except FileNotFoundError as exc:
        raise CheckerNotFound(str(exc)) from None
    return proc.returncode, (proc.stdout or "") + (proc.stderr or "")


def _invocations(template: str, workspace: Path, files: list[str]) -> list[list[str]]:
    if "{file}" in template:
        return [_expand(template, workspace, files, f) for f in files]
    return [_expand(template, workspace, files)]


def check_static(language: Language | str, units: Sequence[SourceUnit], workspace,
                 config: CheckerConfig | None = None) -> CompileResult:
    """Compile or syntax-check ``units``; ok iff every invocation exits 0."""
    language = Language(language)
    units = list(units)
    if not units:
        raise ValueError("check_static needs at least one source unit")
    config = config or CheckerConfig()
    workspace = Path(workspace)
    template = resolve_command(language, config)
    mapping = materialize(language, units, workspace)
    files = sorted(p for p in mapping if p.endswith(language.extension))
    if not files:
        files = sorted(mapping)
    commands = _invocations(template, workspace, files)
    if language is Language.PYTHON and config.typecheck_cmd:
        commands += _invocations(config.typecheck_cmd, workspace, files)

    start = time.perf_counter()
    ok = True
    outputs = []
    for args in commands:
        rc, out = _run(args, workspace, config.timeout_secs)
        ok = ok and rc == 0
        if out:
            outputs.append(out)
    duration = time.perf_counter() - start
    raw = "".join(outputs)
    diags = parse_diagnostics(raw, mapping, workspace) if not ok else []
    if not ok and not diags:
        diags = [Diagnostic(None, None, raw.strip()[-2000:] or "checker failed without output")]
    # workspace-relative so persisted evidence does not depend on where the
    # scratch directory happened to live
    invocation = " && ".join(shlex.join(a) for a in commands).replace(str(workspace), ".")
    return CompileResult(ok, tuple(diags), invocation, duration, raw)
