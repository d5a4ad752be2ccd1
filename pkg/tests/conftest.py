import numpy as np
import pytest

from qcnnbind.circuit import ArchitectureSpec, Layer, builtin_arch


def unit_states(rng, count, n_qubits):
    x = rng.normal(size=(count, 1 << n_qubits))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def toy_arch(n_qubits=1, layers=((1, (0,)),), name="toy"):
    return ArchitectureSpec(name, n_qubits, tuple(Layer(m, tuple(q)) for m, q in layers))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fig1a():
    return builtin_arch("fig1a")
