import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of a numbered acceptance criterion for the summary."""
    def record(num: int, ok: bool, detail: str) -> bool:
        _CRITERIA[num] = (bool(ok), detail)
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
