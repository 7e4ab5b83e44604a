import numpy as np
import pytest

from spacinglab import (
    CENTER_DENSITY,
    EnsembleSpec,
    SamplerState,
    default_window,
    gap_curves,
    integrate_sigma,
    rescale_localize,
    sample_tridiagonal,
    universal_cdf,
)


@pytest.fixture(scope="session")
def traj():
    return integrate_sigma(140.0)


@pytest.fixture(scope="session")
def curves(traj):
    return gap_curves(traj, 10.0)


@pytest.fixture(scope="session")
def cdfs(curves):
    return {beta: universal_cdf(beta, curves[beta], 100) for beta in (1, 2, 4)}


@pytest.fixture(scope="session")
def cdf2_m50(curves):
    return universal_cdf(2, curves[2], 50)


def gue_window(n, seed=0, stream=0, delta_exponent=-0.6):
    """One sampled GUE spectrum localized in the default center window."""
    spec = EnsembleSpec(beta=2, n=n)
    values = sample_tridiagonal(spec, SamplerState(seed=seed, stream=stream))
    window = default_window(n, psi_a=CENTER_DENSITY, delta_exponent=delta_exponent)
    return rescale_localize(values, window)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
