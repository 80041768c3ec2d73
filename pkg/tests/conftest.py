import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slscreen import Dataset, SyntheticConfig, gen_synthetic

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_dataset(seed, m, n, scale=1.0):
    """Gaussian design with labels from a random linear model."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n)) * scale
    w = rng.standard_normal(n)
    p = 1.0 / (1.0 + np.exp(-(a @ w)))
    y = np.where(rng.uniform(size=m) < p, 1.0, -1.0)
    return Dataset(a, y)


@pytest.fixture
def small_synthetic():
    return gen_synthetic(SyntheticConfig(n=8, m=20, k=2, s=5.0, seed=11))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
