import json

import pytest

import replay
from sentinel.cli import build_parser, main

LIGHT = ["rope-rename-variable-keyword", "syn-python-rename-method-call-site"]


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("run", "review", "report", "variants", "corpus"):
        assert cmd in out


def test_corpus_validate(tmp_path, capsys):
    from sentinel.corpus import builtin_corpus_root

    assert main(["corpus", "validate", str(builtin_corpus_root())]) == 0
    assert "9 valid case(s)" in capsys.readouterr().out
    (tmp_path / "bad.case.json").write_text("{}")
    assert main(["corpus", "validate", str(tmp_path)]) == 1
    assert "MALFORMED_CASE" in capsys.readouterr().out


def test_run_review_report_cycle(tmp_path, capsys):
    path = replay.write_config(tmp_path, k=1)
    text = path.read_text().replace("[run]", "[corpus]\nselect = { ids = %s }\n\n[run]" % json.dumps(LIGHT))
    path.write_text(text)
    assert main(["run", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "2 attempts: 0 decided, 2 pending adjudication, 0 failed" in out
    run_dir = str(tmp_path / "run")

    assert main(["review", "list", run_dir]) == 0
    out = capsys.readouterr().out
    assert "== rope-rename-variable-keyword/replay/1" in out and "2 attempt(s) awaiting review" in out

    assert main(["review", "set", run_dir, "rope-rename-variable-keyword/replay/1", "--correct",
                 "--notes", "names the keyword", "--reviewer", "ana"]) == 0
    assert "decided, correct" in capsys.readouterr().out
    assert main(["review", "set", run_dir, "rope-rename-variable-keyword/replay/1", "--incorrect"]) == 1
    assert "--force" in capsys.readouterr().err

    assert main(["report", run_dir, "--format", "csv"]) == 0
    names = {p.name for p in (tmp_path / "run" / "reports").iterdir()}
    assert "detection_rates.csv" in names and "summary.md" in names  # from the run's own report
    assert main(["report", run_dir, "--format", "pdf"]) == 1


def test_resume_flag(tmp_path, capsys):
    path = replay.write_config(tmp_path, k=1)
    path.write_text(path.read_text().replace("[run]", "[corpus]\nselect = { ids = %s }\n\n[run]" % json.dumps(LIGHT)))
    assert main(["run", "--config", str(path), "--no-report"]) == 0
    assert not (tmp_path / "run" / "reports").exists()
    assert main(["run", "--config", str(path), "--resume", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "reports" / "metrics.json").exists()


def test_variants_generate(tmp_path, capsys):
    from sentinel.corpus import builtin_corpus_root

    rc = main(["variants", "generate", str(builtin_corpus_root()), "--seed", "3", "--scope", "variables,numbers",
               "--ids", "rope-rename-variable-keyword", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "rope-rename-variable-keyword--s3-numbers+variables: verified" in out
    assert (tmp_path / "variants" / "rope-rename-variable-keyword" / "plan.json").exists()


def test_errors_are_reported(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 1
    assert "error:" in capsys.readouterr().err


def test_parser_requires_verdict():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["review", "set", "d", "a/b/1"])
