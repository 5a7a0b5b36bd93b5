import numpy as np
import pytest

from cylgap import assemble, coeff, eig, grid

MU1 = (np.pi / 2.0) ** 2


@pytest.fixture(scope="session")
def model06():
    return coeff.model_field(0.6)


@pytest.fixture(scope="session")
def cross32(model06):
    """Cross-section mesh at 32 cells/unit with the model eigenpairs."""
    mesh = grid.build_mesh("cross-section", omega=(-1, 1), resolution=32)
    K, M = assemble.assemble_cross_section(mesh, model06)
    W1 = eig.smallest_eigenpairs(K, M, count=2)[0]
    Kr, Mr = assemble.assemble_cross_section(mesh, model06, reduced=True)
    w1 = eig.smallest_eigenpairs(Kr, Mr, count=1)[0]
    return {"mesh": mesh, "K": K, "M": M, "W1": W1, "w1": w1,
            "mu1": W1.value, "Lambda1": w1.value}


def random_spd(rng, n, scale=1.0):
    R = rng.standard_normal((n, n))
    A = R @ R.T
    return A + (0.1 + scale) * np.eye(n)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
