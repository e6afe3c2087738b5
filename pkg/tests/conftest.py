from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sqdkit.configs import SystemSpec
from sqdkit.integrals import random_hamiltonian

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def h_44():
    """Random (M=4, 2 alpha, 2 beta) instance."""
    return random_hamiltonian(SystemSpec(4, 2, 2), seed=7)


@pytest.fixture
def h_633():
    return random_hamiltonian(SystemSpec(6, 3, 3), seed=11)


def random_subset(configs: np.ndarray, size: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(configs), size=min(size, len(configs)), replace=False)
    return configs[np.sort(idx)]


# -- acceptance summary --------------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line in the terminal summary.

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    if call.excinfo is None:
        status = "PASS"
    elif item.get_closest_marker("xfail") is not None:
        status = "FAIL (known, see decisions ledger)"
    else:
        status = "FAIL"
    _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status:<4}  {title}")
