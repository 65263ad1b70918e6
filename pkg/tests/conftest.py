"""Shared independent oracles for the test suite."""

import numpy as np
import pytest


def bisect_root(fn, lo, hi, iters=200):
    """Plain bisection; the oracle for closed-form root claims."""
    flo = fn(lo)
    assert flo * fn(hi) < 0, "oracle bracket must straddle the root"
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) * flo > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def central_diff(fn, x, h=1e-6):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
