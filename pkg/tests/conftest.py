import pytest

import flqr


@pytest.fixture(scope="session")
def grid101():
    return flqr.Grid.uniform(101)


@pytest.fixture(scope="session")
def grid201():
    return flqr.Grid.uniform(201)


@pytest.fixture(scope="session")
def small_sample():
    """Reference synthetic sample at desk scale (n = 60)."""
    return flqr.generate(flqr.SimDesign(n=60, snr=10.0, seed=101))


@pytest.fixture(scope="session")
def small_context(small_sample):
    return flqr.FitContext.build(small_sample)


@pytest.fixture(scope="session")
def medium_sample():
    """Reference synthetic sample at the scale of the reported experiments."""
    return flqr.generate(flqr.SimDesign(n=200, snr=10.0, seed=313))


@pytest.fixture(scope="session")
def medium_context(medium_sample):
    return flqr.FitContext.build(medium_sample)


@pytest.fixture(scope="session")
def medium_fit(medium_sample, medium_context):
    return flqr.fit(medium_sample, 0.5, h=0.1, lam=6e-5, context=medium_context)


@pytest.fixture(scope="session")
def medium_eigensystem(medium_sample, medium_fit):
    return flqr.solve_eigensystem(medium_sample, medium_fit.b_hat)
