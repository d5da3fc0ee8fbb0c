import logging

import numpy as np
import pytest

from skillspace.data import correlation_matrix
from skillspace.paf import fit_paf, rotate_orthomax
from skillspace.scores import regression_weights, score_models
from skillspace.synthetic import make_suite


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR)


@pytest.fixture(scope="session")
def suite():
    return make_suite(n_models=200, n_tasks=40, n_factors=8, low=0.7, high=0.9, seed=0)


@pytest.fixture(scope="session")
def fitted(suite):
    r = correlation_matrix(suite.z)
    fm = rotate_orthomax(fit_paf(r, 8))
    theta = score_models(regression_weights(fm, r), suite.z)
    return r, fm, theta


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
