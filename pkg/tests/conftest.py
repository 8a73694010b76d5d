import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def artifacts():
    """Trained desk-scale artifacts from the run cache ($PATCHFLOW_RUNS or
    ./runs); trains them first if the cache is empty (hours, one time)."""
    from patchflow.recipes import ensure_all

    return ensure_all()
