import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from disg.model import reference_model  # noqa: E402
from disg.reward import GameParams  # noqa: E402
from disg.strategy import build_grid  # noqa: E402

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# cost at which the reference model has a proper (non-empty, non-full) ItRA band
BAND_COST = 0.0225


@pytest.fixture(scope="session")
def model():
    return reference_model()


@pytest.fixture(scope="session")
def grid200():
    return build_grid(2, 200)


@pytest.fixture(scope="session")
def grid50():
    return build_grid(2, 50)


@pytest.fixture
def params():
    return GameParams()


@pytest.fixture
def band_params():
    return GameParams.symmetric(BAND_COST)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance reporting -------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    label = props.get("criterion")
    if label is None:
        return
    status = "PASS" if report.outcome == "passed" else "FAIL"
    _CRITERIA[label] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")

    def order(label):
        head = label.split()[0]
        digits = "".join(ch for ch in head if ch.isdigit())
        return (int(digits or 0), label)

    for label in sorted(_CRITERIA, key=order):
        status, detail = _CRITERIA[label]
        terminalreporter.write_line(f"{status}  {label}  {detail}")
