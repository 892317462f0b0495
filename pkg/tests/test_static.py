import pytest

from conftest import needs_cc, needs_java
from sentinel.corpus import Language, SourceUnit, builtin_corpus_root, load_corpus
from sentinel.errors import CheckerNotFound, CheckerTimeout, ConfigError, WorkspaceIOError
from sentinel.oracles.static import (
    CheckerConfig,
    CompileResult,
    check_static,
    materialize,
    parse_diagnostics,
    resolve_command,
)


@pytest.fixture(scope="module")
def index():
    return load_corpus(builtin_corpus_root())


def test_python_ok_and_failing(tmp_path, index):
    rope = index.get("rope-rename-variable-keyword")
    assert check_static("python", rope.before, tmp_path / "a").ok
    bad = check_static("python", rope.after, tmp_path / "b")
    assert not bad.ok
    assert bad.diagnostics[0].file == "main.py" and bad.diagnostics[0].line == 3
    assert "SyntaxError" in bad.diagnostics[0].message
    assert str(tmp_path) not in bad.tool_invocation


def test_python_every_file_is_checked(tmp_path):
    units = [SourceUnit("a.py", "x = (\n"), SourceUnit("b.py", "def f(:\n    pass\n")]
    result = check_static(Language.PYTHON, units, tmp_path)
    assert {d.file for d in result.diagnostics} == {"a.py", "b.py"}


def test_runtime_error_is_not_a_static_error(tmp_path, index):
    case = index.get("syn-python-rename-method-call-site")
    assert check_static("python", case.after, tmp_path).ok


@needs_cc
def test_c(tmp_path, index):
    cdt = index.get("cdt-extract-function-c")
    assert check_static("c", cdt.before, tmp_path / "a").ok
    bad = check_static("c", cdt.after, tmp_path / "b")
    assert not bad.ok and bad.diagnostics[0].file == "main.c" and bad.diagnostics[0].line


@needs_java
def test_java_multi_type_unit(tmp_path, index):
    case = index.get("syn-java-pull-up-method-field-access")
    assert check_static("java", case.before, tmp_path / "a").ok
    bad = check_static("java", case.after, tmp_path / "b")
    assert not bad.ok
    # the unit is split per type but diagnostics point back at the original unit and line
    assert bad.diagnostics[0].file == "Main.java" and bad.diagnostics[0].line == 4


def test_materialize_rejects_escapes(tmp_path):
    with pytest.raises(WorkspaceIOError):
        materialize(Language.PYTHON, [SourceUnit("../evil.py", "x = 1")], tmp_path)
    with pytest.raises(WorkspaceIOError):
        materialize(Language.PYTHON, [SourceUnit("/etc/evil.py", "x = 1")], tmp_path)


def test_materialize_adds_extension(tmp_path):
    mapping = materialize(Language.PYTHON, [SourceUnit("unit1", "x = 1\n")], tmp_path)
    assert mapping == {"unit1.py": "unit1"}


def test_custom_command_and_missing_tool(tmp_path):
    cfg = CheckerConfig({Language.PYTHON: "definitely-not-a-real-checker {files}"})
    with pytest.raises(CheckerNotFound):
        check_static("python", [SourceUnit("a.py", "x = 1")], tmp_path, cfg)


def test_timeout(tmp_path):
    cfg = CheckerConfig({Language.PYTHON: "{python} -c 'import time; time.sleep(5)'"}, timeout_secs=0.2)
    with pytest.raises(CheckerTimeout):
        check_static("python", [SourceUnit("a.py", "x = 1")], tmp_path, cfg)


def test_java_without_any_compiler(monkeypatch):
    monkeypatch.setattr("sentinel.oracles.static.shutil.which", lambda name: None)
    monkeypatch.delenv("SENTINEL_JANINO_CLASSPATH", raising=False)
    with pytest.raises(CheckerNotFound):
        resolve_command(Language.JAVA)


def test_config_mapping():
    cfg = CheckerConfig.from_mapping({"timeout_secs": 5, "python": {"cmd": "x {file}", "typecheck_cmd": "y {files}"},
                                      "c": "gcc -fsyntax-only {files}"})
    assert cfg.commands[Language.PYTHON] == "x {file}" and cfg.typecheck_cmd == "y {files}"
    assert cfg.commands[Language.C] == "gcc -fsyntax-only {files}"
    with pytest.raises(ConfigError):
        CheckerConfig.from_mapping({"rust": "rustc"})


def test_diagnostic_formats(tmp_path):
    mapping = {"u1/A.java": "Main.java", "main.c": "main.c"}
    out = ("File 'u1/A.java', Line 3, Column 5: Unknown variable\n"
           f"{tmp_path}/main.c:7:2: error: expected ';'\n")
    diags = parse_diagnostics(out, mapping, tmp_path)
    assert [(d.file, d.line) for d in diags] == [("Main.java", 3), ("main.c", 7)]


def test_result_round_trip():
    r = CompileResult(False, (), "cc x", 0.5, "boom")
    assert CompileResult.from_dict(r.to_dict()) == r
