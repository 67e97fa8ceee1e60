import numpy as np
import pytest

from textinfluence.aligner import AffineAligner
from textinfluence.heads import LinearHead, MlpHead
from textinfluence.numkernel import normalize


def random_aligner(rng, d, m):
    return AffineAligner(rng.normal(size=(m, d)), rng.normal(size=m))


def random_mlp(rng, d, C=5, hidden=16):
    return MlpHead(rng.normal(size=(hidden, d)) / np.sqrt(d), 0.1 * rng.normal(size=hidden),
                   rng.normal(size=(C, hidden)) / np.sqrt(hidden), 0.1 * rng.normal(size=C))


def random_linear(rng, d, C=5):
    return LinearHead(rng.normal(size=(C, d)) / np.sqrt(d), 0.1 * rng.normal(size=C))


def random_instance(seed, dmin=2, dmax=32):
    """(aligner, z, t_hat) with d, m drawn uniformly from [dmin, dmax]."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(dmin, dmax + 1))
    m = int(rng.integers(dmin, dmax + 1))
    return rng, random_aligner(rng, d, m), rng.normal(size=d), normalize(rng.normal(size=m))


def rel_err(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda l: int(l.split("AC")[1].split()[0])):
            terminalreporter.write_line(line)
