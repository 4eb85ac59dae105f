import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import _report  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not _report.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_report.LINES):
        terminalreporter.write_line(line)
