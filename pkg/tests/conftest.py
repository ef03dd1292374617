"""Shared test configuration.

The acceptance module registers one line per criterion; the terminal
summary hook prints the collected table after the run so the verdicts are
visible even when pytest captures stdout.
"""

import sys

CRITERION_LINES = []

_STATUS = {True: "PASS", False: "FAIL", None: "SKIP"}


def record_criterion(number, passed, detail):
    """Register one verdict line; passed may be True, False, or None (skip)."""
    line = "CRITERION %2d: %s - %s" % (number, _STATUS[passed], detail)
    CRITERION_LINES.append((number, line))
    print(line)
    print(line, file=sys.stderr)


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(CRITERION_LINES):
        terminalreporter.write_line(line)
