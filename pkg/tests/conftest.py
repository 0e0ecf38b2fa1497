import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
