import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance scoreboard (one line per criterion) after the
    test summary, so it survives output capture."""
    mod = (sys.modules.get("test_acceptance")
           or sys.modules.get("tests.test_acceptance"))
    lines = getattr(mod, "SCOREBOARD", None) if mod else None
    if lines:
        terminalreporter.section("acceptance scoreboard")
        for line in lines:
            terminalreporter.write_line(line)
