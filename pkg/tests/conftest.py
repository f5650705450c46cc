import shutil
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

FIXTURES = HERE / "fixtures"
PKG_FIXTURES = HERE.parent / "src" / "dglcheck" / "data" / "fixtures"

needs_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 binary not on PATH")


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def model1_path():
    return PKG_FIXTURES / "model1.dgl"


@pytest.fixture
def model2_path():
    return PKG_FIXTURES / "model2.dgl"


# acceptance criteria register their outcome here; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, secs, note = ACCEPTANCE[n]
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.2f} s)"
        if note:
            line += f"  {note}"
        terminalreporter.write_line(line)
