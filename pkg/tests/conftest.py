import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import ASPARAGUSATE, THIOPHENE_CHO  # noqa: E402
from molrl.selfies import decode_selfies  # noqa: E402

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def thio():
    return decode_selfies(THIOPHENE_CHO)


@pytest.fixture(scope="session")
def asp():
    return decode_selfies(ASPARAGUSATE)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
