"""Shared pytest hooks.

The acceptance tests record a one-line PASS/FAIL verdict each; echo the
scorecard after the run, outside pytest's output capture, so it is
always visible in the terminal log.
"""

ACCEPTANCE_SCORECARD = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_SCORECARD:
        return
    terminalreporter.section("acceptance scorecard")
    for line in ACCEPTANCE_SCORECARD:
        terminalreporter.write_line(line)
