"""Density-matrix evaluation under depolarizing and phase-damping noise.

All matrices stay real: states and filters are real, and conjugation by the
Pauli ``Y`` of a real matrix equals conjugation by the real matrix
``[[0, -1], [1, 0]]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, MemoryGateError, NormalizationError
from .circuit import ArchitectureSpec, ModelParams, Prediction, _check_inputs, readout
from .linalg import OrthFilter, contract, n_qubits_of

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Y_REAL = np.array([[0.0, -1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

# 2**9 x 2**9 reals is ~2 MB; 12 qubits needs ~128 MB per matrix.
MAX_UNGATED_QUBITS = 9


class Strategy(str, enum.Enum):
    NONE = "none"
    FINAL_QUBIT = "final_qubit"
    LAYER_WISE = "layer_wise"


@dataclass(frozen=True)
class NoiseConfig:
    depol_p: float = 0.05
    phase_gamma: float = 0.03
    strategy: Strategy = Strategy.FINAL_QUBIT

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        for name in ("depol_p", "phase_gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")


@dataclass
class DensityMatrix:
    rho: np.ndarray

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.rho)

    def trace(self) -> float:
        return float(np.trace(self.rho))


def to_density(state) -> DensityMatrix:
    state = np.asarray(state, dtype=float)
    norm = float(state @ state)
    if abs(norm - 1.0) > 1e-6:
        raise NormalizationError(f"state has squared norm {norm:.9f}, expected 1")
    return DensityMatrix(np.outer(state, state))


def _conjugate(rho, mat, qubits):
    """``M rho M^T`` on the given qubits, treating rho as a 2n-qubit vector."""
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    flat = rho.reshape(1, dim * dim)
    flat = contract(flat, mat, list(qubits))  # row index: M rho
    flat = contract(flat, mat, [n + q for q in qubits])  # column index: (M rho) M^T
    return flat.reshape(dim, dim)


def apply_filter_dm(dm: DensityMatrix, filt, qubits) -> DensityMatrix:
    q = filt.q if isinstance(filt, OrthFilter) else filt
    return DensityMatrix(_conjugate(dm.rho, q, list(qubits)))


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")


def _kraus(rho, ops, qubit, weights=None):
    """``sum_k w_k K_k rho K_k^T`` for 2x2 operators on one qubit.

    The channel is folded into coefficients ``c[s, t, i, j]`` acting on the
    four qubit blocks of rho, which avoids permuting the whole matrix.
    """
    dim = rho.shape[0]
    left = 1 << qubit
    right = dim // (2 * left)
    blocks = rho.reshape(left, 2, right, left, 2, right)
    weights = np.ones(len(ops)) if weights is None else weights
    coef = sum(w * np.einsum("si,tj->stij", k, k) for w, k in zip(weights, ops))
    out = np.zeros_like(blocks)
    for s in range(2):
        for t in range(2):
            for i in range(2):
                for j in range(2):
                    c = coef[s, t, i, j]
                    if c != 0.0:
                        out[:, s, :, :, t, :] += c * blocks[:, i, :, :, j, :]
    return out.reshape(dim, dim)


def depolarize(dm: DensityMatrix, qubit: int, p: float) -> DensityMatrix:
    """Kraus set ``sqrt(1-p) I, sqrt(p/3) X, sqrt(p/3) Y, sqrt(p/3) Z`` on one qubit."""
    _check_prob("p", p)
    if p == 0.0:
        return DensityMatrix(dm.rho.copy())
    ops = (np.eye(2), PAULI_X, PAULI_Y_REAL, PAULI_Z)
    return DensityMatrix(_kraus(dm.rho, ops, qubit, (1.0 - p, p / 3.0, p / 3.0, p / 3.0)))


def phase_damp(dm: DensityMatrix, qubit: int, gamma: float) -> DensityMatrix:
    """Kraus set ``diag(1, sqrt(1-g))``, ``diag(0, sqrt(g))``."""
    _check_prob("gamma", gamma)
    k0 = np.diag([1.0, np.sqrt(1.0 - gamma)])
    k1 = np.diag([0.0, np.sqrt(gamma)])
    return DensityMatrix(_kraus(dm.rho, (k0, k1), qubit))


def _noise_on(dm, qubits, cfg):
    for q in qubits:
        dm = depolarize(dm, q, cfg.depol_p)
        dm = phase_damp(dm, q, cfg.phase_gamma)
    return dm


def measure_p0_dm(dm: DensityMatrix) -> float:
    """Trace of the upper-left block, i.e. probability of qubit 0 reading 0."""
    half = dm.rho.shape[0] // 2
    return float(np.trace(dm.rho[:half, :half]))


def evolve_dm(state, qs, arch: ArchitectureSpec, cfg: NoiseConfig) -> DensityMatrix:
    dm = to_density(state)
    for q, layer in zip(qs, arch.layers):
        dm = apply_filter_dm(dm, q, layer.qubits)
        if cfg.strategy is Strategy.LAYER_WISE:
            dm = _noise_on(dm, layer.qubits, cfg)
    if cfg.strategy is Strategy.FINAL_QUBIT:
        dm = _noise_on(dm, [arch.measured_qubit], cfg)
    return dm


def _gate(arch, allow_large):
    if arch.n_qubits > MAX_UNGATED_QUBITS and not allow_large:
        mb = (4**arch.n_qubits) * 8 / 2**20
        raise MemoryGateError(
            f"density evaluation at {arch.n_qubits} qubits needs ~{mb:.0f} MB per matrix; "
            "pass allow_large=True (--allow-large-dm) to proceed"
        )


def noisy_forward(state, params: ModelParams, arch: ArchitectureSpec, cfg: NoiseConfig,
                  allow_large: bool = False) -> Prediction:
    amps = np.asarray(getattr(state, "amplitudes", state), dtype=float)
    _check_inputs(amps[None, :], params, arch)
    _gate(arch, allow_large)
    dm = evolve_dm(amps, params.orth_filters(), arch, cfg)
    p0 = measure_p0_dm(dm)
    return Prediction(p0, 1.0 - p0, params.w0 * p0 + params.w1 * (1.0 - p0))


def noisy_predict_batch(states, params: ModelParams, arch: ArchitectureSpec, cfg: NoiseConfig,
                        allow_large: bool = False) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    _check_inputs(states, params, arch)
    _gate(arch, allow_large)
    qs = params.orth_filters()
    p0 = np.array([measure_p0_dm(evolve_dm(s, qs, arch, cfg)) for s in states])
    return readout(p0, params)
