import pytest

_RECORDS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record a pass/fail verdict for one acceptance criterion.

    Usage: ``criterion(3, ok, "max |F(0) - 1| = 2.1e-15 (tol 1e-12)")``.
    The recorded lines are printed in a dedicated section at the end of
    the pytest run.  The optional ``part`` keyword distinguishes
    sub-criteria sharing a number.
    """

    def record(number: int, passed, detail: str, part: str = "") -> bool:
        _RECORDS.append((int(number), part, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RECORDS:
        return
    terminalreporter.section("acceptance criteria")
    for number, part, passed, detail in sorted(_RECORDS):
        status = "PASS" if passed else "FAIL"
        label = f"{number}{part}"
        terminalreporter.write_line(f"criterion {label:>3s}: {status}  {detail}")
