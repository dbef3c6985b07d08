import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from persistlab.cycle import find_limit_cycle  # noqa: E402
from persistlab.models import DEFAULT_PARAMS  # noqa: E402

# filled by test_acceptance, printed at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def default_cycle():
    return find_limit_cycle(DEFAULT_PARAMS)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][2:])):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
