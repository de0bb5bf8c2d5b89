import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sparsebnb.core import ProblemData

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_problem(rng, n=None, p=None, corr=None, lambda0=None, lambda2=None, big_m=None):
    """Small correlated Gaussian instance with a planted 2-3 sparse signal."""
    n = int(rng.choice([15, 30])) if n is None else n
    p = int(rng.choice([6, 8, 10])) if p is None else p
    corr = float(rng.choice([0.0, 0.2, 0.5])) if corr is None else corr
    g = rng.standard_normal((n, 1))
    X = np.sqrt(corr) * g + np.sqrt(1.0 - corr) * rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[rng.choice(p, size=min(3, p), replace=False)] = rng.uniform(0.5, 2.0, size=min(3, p)) * rng.choice([-1, 1], size=min(3, p))
    y = X @ beta + 0.5 * rng.standard_normal(n)
    return ProblemData(
        X,
        y,
        rng.uniform(0.01, 1.0) if lambda0 is None else lambda0,
        rng.uniform(0.01, 1.0) if lambda2 is None else lambda2,
        rng.uniform(1.0, 10.0) if big_m is None else big_m,
    )


def reference_instance():
    """Fixed instance whose optima were frozen from an independent conic solver."""
    rng = np.random.default_rng(7)
    X = rng.standard_normal((20, 8))
    beta = np.zeros(8)
    beta[[0, 4]] = [1.5, -1.0]
    y = X @ beta + 0.3 * rng.standard_normal(20)
    return X, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion, echoed in the summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
