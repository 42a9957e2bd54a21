import pytest

from iginue import montecarlo as mc

_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def annulus_batch():
    """N=30, alpha=2 batch shared by the window-estimator tests and the acceptance run."""
    cfg = mc.SamplerConfig(N=30, alpha_int=2, seed=2024, replicas=20000)
    return mc.sample_batch(cfg)


@pytest.fixture(scope="session")
def small_batch():
    return mc.sample_batch(mc.SamplerConfig(N=10, alpha_int=1, seed=7, replicas=10000))


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[n])
