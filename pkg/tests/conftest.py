"""Prints the acceptance-gate verdict lines as a terminal-summary section.

Test stdout is captured at the file-descriptor level, so verdict lines from
passing tests would otherwise never reach the report; the summary hook runs
outside capture and is guaranteed to appear in the output of a plain
`pytest -v` run.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None) if mod is not None else None
    if lines:
        terminalreporter.section("acceptance verdicts")
        for line in lines:
            terminalreporter.write_line(line)
