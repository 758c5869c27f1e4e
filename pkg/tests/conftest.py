import os
import sys

# lets test modules share small fixtures by importing each other
sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if not acceptance or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(acceptance.RESULTS, key=lambda k: (int(k.split()[0]), k)):
        terminalreporter.write_line(acceptance.RESULTS[key])
