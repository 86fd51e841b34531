"""Shared pytest wiring: the acceptance criteria report panel."""

import pytest


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def criterion_report(request):
    """Record one pass/fail line per acceptance criterion; the lines are
    echoed in the terminal summary regardless of capture mode."""

    def report(num, passed, detail):
        line = f"criterion {num:02d} {'PASS' if passed else 'FAIL'} - {detail}"
        request.config._criterion_lines.append(line)
        print(f"[acceptance] {line}")
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)
