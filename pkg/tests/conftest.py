import os

import numpy as np
import pytest

from vacflow.config import parse

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: dict = {}


def load_config(name, *overrides):
    with open(os.path.join(CONFIG_DIR, name)) as fh:
        return parse(fh.read(), overrides)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
