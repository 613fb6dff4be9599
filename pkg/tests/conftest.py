import numpy as np
import pytest

from stickytails import ModelParams, make_model


@pytest.fixture(scope="session")
def m0():
    """Symmetric reference model: independent components, unit stickiness."""
    return make_model([-1.0, -1.0], np.eye(2), np.eye(2), [1.0, 1.0])


@pytest.fixture(scope="session")
def m1():
    """Asymmetric reference model with faster decay on the second axis."""
    return make_model([-1.0, -2.0], np.eye(2), np.eye(2), [0.5, 0.5])


def random_stable_model(rng, *, substochastic=True, diag_sigma=False) -> ModelParams:
    """Sample a valid model.

    With ``substochastic=True`` the reflection matrix is I - P^T for a
    nonnegative P with row sums < 0.9, which together with a componentwise
    negative drift guarantees the stability inequalities.  Otherwise
    general off-diagonal entries are drawn and rejected until stable.
    """
    while True:
        mu = -rng.uniform(0.2, 2.0, size=2)
        if diag_sigma:
            sigma = np.diag(rng.uniform(0.4, 2.5, size=2))
        else:
            a, b = rng.uniform(0.4, 2.5, size=2)
            rho = rng.uniform(-0.8, 0.8)
            sigma = np.array([[a, rho * np.sqrt(a * b)], [rho * np.sqrt(a * b), b]])
        if substochastic:
            p = rng.uniform(0.0, 0.45, size=(2, 2))
            refl = np.eye(2) - p.T
        else:
            refl = np.eye(2)
            refl[0, 1] = rng.uniform(-0.6, 0.6)
            refl[1, 0] = rng.uniform(-0.6, 0.6)
        u = rng.uniform(0.1, 2.0, size=2)
        try:
            return make_model(mu, sigma, refl, u)
        except Exception:
            continue
