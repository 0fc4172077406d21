import numpy as np
import pytest

import fluidbm as fb


@pytest.fixture(scope="session")
def m1():
    """Reflected Brownian motion: one phase, mu=-1, sigma2=2."""
    return fb.MmbmModel(Q=[[0.0]], mu=[-1.0], sigma2=[2.0])


@pytest.fixture(scope="session")
def m2():
    """Two symmetric phases, drifts (1, -2), unit variances."""
    return fb.MmbmModel(Q=[[-1.0, 1.0], [1.0, -1.0]], mu=[1.0, -2.0],
                        sigma2=[1.0, 1.0])


@pytest.fixture(scope="session")
def f1():
    """Two-phase fluid queue with rates (+1, -1) and closed-form solution."""
    return fb.FluidModel(T=[[-2.0, 2.0], [1.0, -1.0]], c_plus=[1.0],
                         c_minus=[-1.0])


def random_recurrent_model(rng, m=None) -> fb.MmbmModel:
    """Random positive-recurrent MMBM with bounded entries, m <= 6."""
    if m is None:
        m = int(rng.integers(1, 7))
    q = rng.uniform(0.1, 1.0, size=(m, m))
    np.fill_diagonal(q, 0.0)
    q[np.arange(m), np.arange(m)] = -q.sum(axis=1)
    mu = rng.uniform(-2.0, 2.0, size=m)
    sigma2 = rng.uniform(0.25, 4.0, size=m)
    model = fb.MmbmModel(Q=q, mu=mu, sigma2=sigma2)
    drift = fb.mean_drift(model)
    if drift > -0.2:
        mu = mu - (drift + 0.3)
        model = fb.MmbmModel(Q=q, mu=mu, sigma2=sigma2)
    return model
