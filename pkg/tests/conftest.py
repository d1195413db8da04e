"""Shared test plumbing.

The acceptance tests record one human-readable line per criterion; the
terminal-summary hook prints them after the run regardless of capture
settings, so the criterion verdicts survive in piped logs.
"""

_CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
