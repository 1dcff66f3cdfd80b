import numpy as np
import pytest

from kobvis.config import ExperimentConfig
from kobvis.domains import builtin
from kobvis.geometry import slice_domain
from kobvis.polynomial import to_complex


@pytest.fixture(scope="session")
def ball():
    return builtin("ball")


@pytest.fixture(scope="session")
def disc():
    return builtin("disc")


@pytest.fixture(scope="session")
def polydisc():
    return builtin("polydisc_smooth")


@pytest.fixture(scope="session")
def model():
    return builtin("model_nonpsc")


@pytest.fixture(scope="session")
def ball3():
    return builtin("ball3")


@pytest.fixture(scope="session")
def model_slice(model):
    return slice_domain(model, np.zeros(2), np.array([0, 1 + 0j]), ExperimentConfig().slice_radius)


def interior_samples(domain, count, seed):
    """Uniform points of the domain by rejection from its bounding box."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        z = to_complex(rng.uniform(domain.bbox_min, domain.bbox_max))
        if domain.rho.eval(z) < 0:
            out.append(z)
    return np.array(out)
