import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from interlattice.toy import ToyConfig, generate_suite

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# a few-second scenario for structural tests; the default one is reserved for trend checks
SMALL_TOY = ToyConfig(n_vars=4, hidden=(16, 8), pretrain_samples=400, train_samples=60,
                      eval_samples=40, pretrain_epochs=4, epochs=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_suite():
    return generate_suite(SMALL_TOY)


@pytest.fixture(scope="session")
def default_suite():
    return generate_suite(ToyConfig())


# criterion -> PASS/FAIL line, filled by test_acceptance and echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
