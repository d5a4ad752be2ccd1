"""Evaluating one filter on 2^m inputs at once.

Stacking 2^m states into one register of m + n qubits and applying the filter
to the low n qubits is the same as a block-diagonal operator diag(u, u, ..., u).

Run: python demos/04_block_parallel.py
"""
import numpy as np

from qcnnbind.circuit import block_parallel_apply
from qcnnbind.linalg import apply_filter, project_orthogonal

rng = np.random.default_rng(0)
m, n = 2, 3
u = project_orthogonal(rng.normal(size=(2**n, 2**n))).q
states = rng.normal(size=(2**m, 2**n))
states /= np.linalg.norm(states, axis=1, keepdims=True)

fast = np.stack(block_parallel_apply(list(states), u))
one_by_one = np.stack([apply_filter(s, u, range(n)) for s in states])
big = np.kron(np.eye(2**m), u)
brute = (big @ states.ravel()).reshape(2**m, -1)

print(f"{2**m} states of {n} qubits -> one {m + n}-qubit register ({big.shape[0]}x{big.shape[1]} operator)")
print("max |parallel - one by one| =", np.max(np.abs(fast - one_by_one)))
print("max |parallel - block matrix| =", np.max(np.abs(fast - brute)))
