import re

import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def acceptance_log(request, capsys):
    """Record one acceptance line; shown live and in the terminal summary."""
    lines = request.config.stash[_KEY]

    def log(line):
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)

    return log


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = re.search(r"test_c(\d+)_", item.name)
    if report.skipped and m and item.module.__name__.endswith("test_acceptance"):
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
        item.config.stash[_KEY].append(
            f"SKIP criterion {m.group(1)}: {reason.removeprefix('Skipped: ')}")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_KEY]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(re.search(r"criterion (\d+)", l).group(1))):
            terminalreporter.write_line(line)
