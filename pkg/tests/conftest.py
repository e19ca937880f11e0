import numpy as np
import pytest

from shiftalign.synth import SynthSpec, generate

_CRITERIA = []


def loop_score(a, b, s, t):
    """Pure-Python double loop over the overlap; reference for the reference."""
    m, n = len(a), len(a[0])
    total, area = 0.0, 0
    for i in range(m):
        for j in range(n):
            if 0 <= i + s < m and 0 <= j + t < n:
                d = a[i + s][j + t] - b[i][j]
                total += d * d
                area += 1
    return total / area


def loop_corr(a, b, s, t):
    m, n = len(a), len(a[0])
    total = 0.0
    for i in range(m):
        for j in range(n):
            if 0 <= i + s < m and 0 <= j + t < n:
                total += a[i + s][j + t] * b[i][j]
    return total


@pytest.fixture
def record_criterion():
    """Record a one-line pass/fail verdict for the acceptance summary."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA):
        terminalreporter.write_line(line)


ACCEPT_NOISE_FRACTION = 0.05


@pytest.fixture(scope="session")
def drift_spec():
    return SynthSpec(rows=128, cols=128, frames=50, max_drift=20, rng_seed=11)


@pytest.fixture(scope="session")
def clean_drift(drift_spec):
    return generate(drift_spec)


@pytest.fixture(scope="session")
def noisy_drift(drift_spec):
    spec = SynthSpec(
        rows=drift_spec.rows,
        cols=drift_spec.cols,
        frames=drift_spec.frames,
        max_drift=drift_spec.max_drift,
        rng_seed=drift_spec.rng_seed,
        noise_sigma=ACCEPT_NOISE_FRACTION * drift_spec.dynamic_range,
    )
    return generate(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
