"""Orthogonal projection of filter matrices and their action on statevectors.

Statevectors are real arrays of length ``2**n`` (or batches of shape
``(B, 2**n)``). Qubit 0 is the most significant bit of the amplitude index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DuplicateQubitError, QubitRangeError, RankDeficiencyError, ShapeError

SIGMA_MIN = 1e-8


@dataclass(frozen=True)
class OrthFilter:
    q: np.ndarray

    @property
    def m(self) -> int:
        return self.q.shape[0].bit_length() - 1


def _svd(raw):
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ShapeError(f"filter must be square, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ShapeError("filter has non-finite entries")
    u, s, vt = np.linalg.svd(raw)
    if s[-1] <= SIGMA_MIN:
        raise RankDeficiencyError(
            f"smallest singular value {s[-1]:.3e} <= {SIGMA_MIN:g}; polar factor is ill-defined"
        )
    return u, s, vt


def project_orthogonal(raw) -> OrthFilter:
    """Nearest orthogonal matrix ``U @ Vt`` from the SVD ``raw = U S Vt``."""
    u, _, vt = _svd(raw)
    return OrthFilter(u @ vt)


def polar_backward(raw, grad_q) -> np.ndarray:
    """Pull a gradient w.r.t. the polar factor back to the raw matrix.

    With ``H = U^T G V`` the result is ``U K V^T`` where
    ``K_ij = (H_ij - H_ji) / (s_i + s_j)``.
    """
    u, s, vt = _svd(raw)
    h = u.T @ grad_q @ vt.T
    k = (h - h.T) / (s[:, None] + s[None, :])
    return u @ k @ vt


def orthogonality_error(q) -> float:
    q = np.asarray(q, dtype=float)
    return float(np.max(np.abs(q.T @ q - np.eye(q.shape[0]))))


def _check_qubits(qubits, n):
    qubits = [int(i) for i in qubits]
    if len(set(qubits)) != len(qubits):
        raise DuplicateQubitError(f"duplicate qubit indices in {qubits}")
    bad = [i for i in qubits if not 0 <= i < n]
    if bad:
        raise QubitRangeError(f"qubit indices {bad} outside [0, {n - 1}]")
    return qubits


def n_qubits_of(states) -> int:
    dim = np.shape(states)[-1]
    n = int(dim).bit_length() - 1
    if dim != 1 << n:
        raise ShapeError(f"state length {dim} is not a power of two")
    return n


def to_front(states, qubits, n):
    """View a ``(B, 2**n)`` batch as ``(B, 2**m, 2**(n-m))`` with ``qubits`` leading."""
    b = states.shape[0]
    t = states.reshape((b,) + (2,) * n)
    t = np.moveaxis(t, [1 + i for i in qubits], range(1, 1 + len(qubits)))
    return t.reshape(b, 1 << len(qubits), -1)


def from_front(arr, qubits, n):
    b = arr.shape[0]
    m = len(qubits)
    t = arr.reshape((b,) + (2,) * n)
    t = np.moveaxis(t, range(1, 1 + m), [1 + i for i in qubits])
    return t.reshape(b, -1)


def contract(states, mat, qubits):
    """Apply ``mat`` to the listed qubit axes without any orthogonality check."""
    states = np.asarray(states, dtype=float)
    single = states.ndim == 1
    batch = states[None, :] if single else states
    n = n_qubits_of(batch)
    qubits = _check_qubits(qubits, n)
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (1 << len(qubits),) * 2:
        raise ShapeError(f"matrix shape {mat.shape} does not match {len(qubits)} qubits")
    out = from_front(np.matmul(mat, to_front(batch, qubits, n)), qubits, n)
    return out[0] if single else out


def apply_filter(state, filt, qubits):
    """Apply an orthogonal filter (``OrthFilter`` or plain matrix) to ``qubits``.

    The first listed qubit maps to the most significant bit of the filter's
    row/column index.
    """
    q = filt.q if isinstance(filt, OrthFilter) else filt
    return contract(state, q, qubits)


def param_counts(arities) -> tuple[int, int]:
    """Total and independent real parameters for filters of the given arities, plus two readout weights."""
    total = sum(4**m for m in arities) + 2
    independent = sum((2**m) * (2**m - 1) // 2 for m in arities) + 2
    return total, independent


def count_params(arch) -> tuple[int, int]:
    return param_counts([layer.arity for layer in arch.layers])
