import numpy as np
import pytest

import funcrate as fr


@pytest.fixture(scope="session")
def bm_cert():
    return fr.certificate_for(fr.BrownianScaled(1.0), 1.0)


@pytest.fixture(scope="session")
def stable_cert():
    return fr.certificate_for(fr.SymmetricStable(1.5), 1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20150722)
