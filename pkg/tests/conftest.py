"""Shared pytest wiring.

The acceptance tests register one status line each; replaying them in the
terminal summary keeps every criterion's PASS/FAIL and measured values
visible in a default (captured) run, not just the failures.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
