"""Shared pytest hooks: always-visible acceptance criterion lines."""

_CRITERIA_LINES: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERIA_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA_LINES:
            terminalreporter.line(line)
