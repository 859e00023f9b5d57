"""Shared pytest wiring.

test_acceptance.py registers one verdict line per criterion; the hook
below prints them in a summary block at the end of the run so they stay
visible under output capture.
"""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines:
        terminalreporter.write_line(line)
