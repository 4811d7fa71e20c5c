import numpy as np
import pytest


def gaps_with_moments(mean, sd, n=2000, seed=0):
    """Nonnegative gaps whose sample mean and (n-1) sd equal the targets exactly.

    A gamma sample is affinely rescaled; its shape is lowered below 1 for
    targets with sd > mean so the rescaled gaps can stay nonnegative.
    """
    shape = min(1.0, 0.9 * (mean / sd) ** 2)
    for s in range(seed, seed + 1000):
        x = np.random.default_rng(s).gamma(shape, 1.0, n)
        z = (x - x.mean()) / x.std(ddof=1)
        g = mean + sd * z
        if g.min() >= 0:
            return g
    raise RuntimeError("no feasible sample found")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
