import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_spectra():
    from ht_sentinel.synth import trajectory_spectra

    return trajectory_spectra()


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line, print it, and fail the test if it did not pass."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, name, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {name} ({detail})"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
