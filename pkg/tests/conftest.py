import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

REPO = __import__("pathlib").Path(__file__).resolve().parents[1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def repo_root():
    return REPO


def pytest_terminal_summary(terminalreporter):
    lines = [value for key in ("passed", "failed")
             for rep in terminalreporter.stats.get(key, []) if rep.when == "call"
             for name, value in getattr(rep, "user_properties", []) if name == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
