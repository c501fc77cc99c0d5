import numpy as np
import pytest

from qemlab import hcl
from qemlab.noisy_sim import NoiseModel
from qemlab.pauli import ground_state


@pytest.fixture(scope="session")
def hamiltonian():
    return hcl.hamiltonian()


@pytest.fixture(scope="session")
def exact_energy(hamiltonian):
    return ground_state(hamiltonian)[0]


@pytest.fixture(scope="session")
def optimal_angles():
    return np.array(hcl.OPTIMAL_ANGLES)


@pytest.fixture(scope="session")
def falcon():
    return NoiseModel.falcon_like()


@pytest.fixture(scope="session")
def noiseless():
    return NoiseModel.noiseless()
