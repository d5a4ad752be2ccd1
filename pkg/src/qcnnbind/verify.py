"""Built-in consistency checks between independent evaluation paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import block_parallel_apply, builtin_archs, predict_p0, readout
from .linalg import contract, orthogonality_error, project_orthogonal
from .noise import NoiseConfig, Strategy, evolve_dm, measure_p0_dm
from .trainer import init_params


@dataclass
class Check:
    name: str
    deviation: float
    threshold: float

    @property
    def ok(self) -> bool:
        return bool(self.deviation <= self.threshold)

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        return f"{tag}  {self.name:<40} max deviation {self.deviation:.3e} (<= {self.threshold:.0e})"


def random_unit_states(rng, count, n_qubits):
    x = rng.normal(size=(count, 1 << n_qubits))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_orthogonal(rng, dim):
    return project_orthogonal(rng.normal(size=(dim, dim))).q


def cross_engine_deviation(arch, params, states) -> float:
    """Max prediction gap between statevector and zero-noise density evolution."""
    sv = predict_p0(states, params, arch)
    qs = params.orth_filters()
    cfg = NoiseConfig(strategy=Strategy.NONE)
    dm = np.array([measure_p0_dm(evolve_dm(s, qs, arch, cfg)) for s in states])
    return float(np.max(np.abs(readout(sv, params) - readout(dm, params))))


def block_parallel_deviation(rng, m, n) -> float:
    u = random_orthogonal(rng, 1 << n)
    states = list(random_unit_states(rng, 1 << m, n))
    fast = np.stack(block_parallel_apply(states, u))
    big = np.kron(np.eye(1 << m), u)  # explicit block-diagonal operator
    stacked = np.concatenate(states) / np.sqrt(1 << m)
    brute = (big @ stacked).reshape(1 << m, -1) * np.sqrt(1 << m)
    per_state = np.stack([contract(s, u, range(n)) for s in states])
    return float(max(np.max(np.abs(fast - brute)), np.max(np.abs(fast - per_state))))


def run_checks(draws: int = 2, include_large: bool = True, seed: int = 0, checkpoint=None) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []
    for arch in builtin_archs():
        if arch.n_qubits > 9 and not include_large:
            continue
        worst = 0.0
        for d in range(draws):
            params = init_params(arch, seed * 1000 + d)
            states = random_unit_states(rng, 1, arch.n_qubits)
            worst = max(worst, cross_engine_deviation(arch, params, states))
        checks.append(Check(f"statevector-vs-density[{arch.name}]", worst, 1e-10))

    worst = max(block_parallel_deviation(rng, m, n) for m in range(4) for n in range(1, 5))
    checks.append(Check("block-parallel[m<=3,n<=4]", worst, 1e-12))

    worst = 0.0
    for m in (3, 4, 5):
        for _ in range(10):
            worst = max(worst, orthogonality_error(project_orthogonal(rng.uniform(size=(2**m, 2**m))).q))
    checks.append(Check("projection-orthogonality", worst, 1e-10))

    if checkpoint is not None:
        arch, params, stored = checkpoint
        checks.append(Check("checkpoint-orthogonality",
                            max(orthogonality_error(q) for q in stored), 1e-10))
        checks.append(Check("checkpoint-projection-consistency",
                            max(float(np.max(np.abs(q - p))) for q, p in zip(stored, params.orth_filters())),
                            1e-10))
        if arch.n_qubits <= 9 or include_large:
            states = random_unit_states(rng, max(1, draws), arch.n_qubits)
            checks.append(Check("checkpoint-statevector-vs-density",
                                cross_engine_deviation(arch, params, states), 1e-10))
    return checks
