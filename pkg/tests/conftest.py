from __future__ import annotations

import pytest

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = (label, "PASS" if ok else "FAIL", detail)
        _ACCEPTANCE.append(line)
        print(f"{line[1]} {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status} {label}: {detail}")
