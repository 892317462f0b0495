import os
import shutil
import sys
from pathlib import Path

import pytest

from sentinel.corpus import Language
from sentinel.errors import CheckerNotFound
from sentinel.oracles.static import JANINO_ENV, resolve_command

JANINO_JARS = [Path("/opt/janino/janino-3.1.9.jar"), Path("/opt/janino/commons-compiler-3.1.9.jar")]

# Let the Java oracle fall back to Janino on machines without javac.
if JANINO_ENV not in os.environ and all(p.exists() for p in JANINO_JARS):
    os.environ[JANINO_ENV] = os.pathsep.join(str(p) for p in JANINO_JARS)

FIXTURES = Path(__file__).parent / "fixtures"


def has_checker(lang: Language) -> bool:
    try:
        cmd = resolve_command(lang)
    except CheckerNotFound:
        return False
    exe = cmd.split()[0].strip("'")
    return exe == "{python}" or shutil.which(exe) is not None or Path(exe).exists()


needs_java = pytest.mark.skipif(not has_checker(Language.JAVA), reason="no Java compiler available")
needs_cc = pytest.mark.skipif(not has_checker(Language.C), reason="no C compiler available")


@pytest.fixture
def fixture_text():
    return lambda name: (FIXTURES / name).read_text(encoding="utf-8")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
