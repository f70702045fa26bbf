"""Shared test configuration and the acceptance scoreboard.

Acceptance tests report into ACCEPTANCE_RESULTS so the terminal summary can
print one pass/fail line per criterion regardless of how pytest groups the
underlying assertions.
"""

ACCEPTANCE_RESULTS = []


def record_criterion(number: int, description: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((int(number), description, bool(passed)))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, desc, ok in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:02d} [{verdict}] {desc}")
