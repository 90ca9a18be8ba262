import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spdflow.fieldio import SyntheticSpec, add_noise, generate_synthetic  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def denoising_fields():
    """Ground truth and noisy field of the desk-scale denoising experiment."""
    truth = generate_synthetic(SyntheticSpec("two_region", (32, 32)))
    noisy = add_noise(truth, 0.3, seed=2024)
    return truth, noisy


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results.values():
            terminalreporter.write_line(line)
