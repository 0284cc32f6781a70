import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catconv.coupling import Setup, picard_solve
from catconv.problem import reference_problem

settings.register_profile("catconv", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("catconv")


@pytest.fixture(scope="session")
def ref_spec():
    return reference_problem()


@pytest.fixture(scope="session")
def ref_setup(ref_spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Setup(ref_spec)


@pytest.fixture(scope="session")
def ref_solution(ref_spec, ref_setup):
    """Converged (u_s, u_f, report) on the reference instance."""
    return picard_solve(ref_spec, 1e-10, 100, setup=ref_setup)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
