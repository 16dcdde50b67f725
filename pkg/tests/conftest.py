import os

import numpy as np
import pytest

from activedecode.code import bch_code, hamming74, repetition, single_parity_check


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ACTIVEDECODE_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="long-running; set ACTIVEDECODE_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def spc3():
    return single_parity_check(3)


@pytest.fixture(scope="session")
def rep3():
    return repetition(3)


@pytest.fixture(scope="session")
def ham():
    return hamming74()


@pytest.fixture(scope="session")
def bch63():
    return bch_code(63, 36, 5)


# acceptance criteria report a one-line verdict each; collected here and
# repeated in the terminal summary so they show up without -s
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
