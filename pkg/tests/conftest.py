import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of (clause, passed, detail)
_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record one clause of an acceptance criterion and echo it."""
    def record(number: int, clause: str, passed: bool, detail: str = ""):
        _CRITERIA.setdefault(number, []).append((clause, bool(passed), detail))
        status = "PASS" if passed else "FAIL"
        print(f"criterion {number} [{clause}]: {status} {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        clauses = _CRITERIA[number]
        ok = all(passed for _, passed, _ in clauses)
        failed = [c for c, passed, _ in clauses if not passed]
        detail = "" if ok else f" (failing: {', '.join(failed)})"
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}{detail}")
        for clause, passed, info in clauses:
            terminalreporter.write_line(
                f"    {clause}: {'pass' if passed else 'FAIL'} {info}".rstrip())
