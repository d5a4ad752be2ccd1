import math

import numpy as np
import pytest

from conftest import toy_arch, unit_states
from qcnnbind.circuit import builtin_arch, builtin_archs, predict_batch, forward
from qcnnbind.errors import ConfigurationError, DomainError, MemoryGateError, NormalizationError
from qcnnbind.linalg import apply_filter, project_orthogonal
from qcnnbind.noise import (
    PAULI_Y_REAL,
    DensityMatrix,
    NoiseConfig,
    Strategy,
    _kraus,
    apply_filter_dm,
    depolarize,
    evolve_dm,
    noisy_forward,
    noisy_predict_batch,
    phase_damp,
    to_density,
)
from qcnnbind.trainer import init_params

P, G = 0.05, 0.03


def dm(a):
    return DensityMatrix(np.array(a, dtype=float))


def test_to_density():
    np.testing.assert_array_equal(to_density([1.0, 0.0]).rho, [[1, 0], [0, 0]])
    np.testing.assert_allclose(to_density([math.sqrt(0.5)] * 2).rho, np.full((2, 2), 0.5), atol=1e-15)
    with pytest.raises(NormalizationError):
        to_density([1.0, 1.0])


def test_trace_one(rng):
    for x in unit_states(rng, 5, 4):
        assert abs(to_density(x).trace() - 1) < 1e-12


def test_apply_filter_dm(rng):
    x = unit_states(rng, 1, 4)[0]
    np.testing.assert_array_equal(apply_filter_dm(to_density(x), np.eye(4), [1, 3]).rho, to_density(x).rho)
    q = project_orthogonal(rng.uniform(size=(8, 8))).q
    out = apply_filter_dm(to_density(x), q, [2, 0, 3])
    np.testing.assert_allclose(out.rho, to_density(apply_filter(x, q, [2, 0, 3])).rho, atol=1e-14)
    assert abs(out.trace() - 1) < 1e-12


def test_real_y_matches_complex_y(rng):
    a = rng.normal(size=(4, 4))
    rho = a @ a.T
    y = np.array([[0, -1j], [1j, 0]])
    for qubit in (0, 1):
        full = np.kron(y, np.eye(2)) if qubit == 0 else np.kron(np.eye(2), y)
        real = np.kron(PAULI_Y_REAL, np.eye(2)) if qubit == 0 else np.kron(np.eye(2), PAULI_Y_REAL)
        np.testing.assert_allclose(full @ rho @ full.conj().T, real @ rho @ real.T, atol=1e-14)


def test_depolarize_examples():
    rho = dm([[0.3, 0.1], [0.1, 0.7]])
    np.testing.assert_array_equal(depolarize(rho, 0, 0.0).rho, rho.rho)
    mixed = dm(np.eye(2) / 2)
    np.testing.assert_allclose(depolarize(mixed, 0, 0.4).rho, mixed.rho, atol=1e-15)
    out = depolarize(dm([[1, 0], [0, 0]]), 0, P).rho
    np.testing.assert_allclose(np.diag(out), [1 - 2 * P / 3, 2 * P / 3], atol=1e-15)
    assert abs(out[0, 0] - 0.966667) < 1e-6
    with pytest.raises(DomainError):
        depolarize(rho, 0, 1.2)


def test_phase_damp_examples(rng):
    diag = dm(np.diag([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_allclose(phase_damp(diag, 1, 0.7).rho, diag.rho, atol=1e-15)
    x = unit_states(rng, 1, 2)[0]
    killed = phase_damp(to_density(x), 0, 1.0).rho
    # coherences between qubit-0 blocks vanish
    assert not killed[:2, 2:].any() and not killed[2:, :2].any()
    out = phase_damp(dm([[0.5, 0.5], [0.5, 0.5]]), 0, G).rho
    assert abs(out[0, 1] - 0.5 * math.sqrt(1 - G)) < 1e-15
    assert abs(out[0, 1] - 0.492443) < 1e-6
    with pytest.raises(DomainError):
        phase_damp(diag, 0, -0.1)


def test_trace_and_positivity(rng):
    for n in (2, 3):
        for _ in range(5):
            d = to_density(unit_states(rng, 1, n)[0])
            for _ in range(6):
                q = int(rng.integers(n))
                op = rng.integers(3)
                if op == 0:
                    d = depolarize(d, q, float(rng.uniform()))
                elif op == 1:
                    d = phase_damp(d, q, float(rng.uniform()))
                else:
                    d = apply_filter_dm(d, project_orthogonal(rng.uniform(size=(2, 2))).q, [q])
                assert abs(d.trace() - 1) < 1e-10
                assert np.linalg.eigvalsh(d.rho).min() >= -1e-9


def test_zero_noise_matches_statevector(rng):
    none = NoiseConfig(strategy=Strategy.NONE)
    zero = NoiseConfig(0.0, 0.0, Strategy.FINAL_QUBIT)
    for arch in builtin_archs():
        if arch.n_qubits > 9:
            continue
        params = init_params(arch, 11)
        x = unit_states(rng, 3, arch.n_qubits)
        clean = predict_batch(x, params, arch)
        assert np.max(np.abs(noisy_predict_batch(x, params, arch, none) - clean)) <= 1e-10
        np.testing.assert_array_equal(noisy_predict_batch(x, params, arch, zero),
                                      noisy_predict_batch(x, params, arch, none))


def test_final_qubit_affine_law(rng, fig1a):
    params = init_params(fig1a, 2)
    cfg = NoiseConfig(P, G, Strategy.FINAL_QUBIT)
    for x in unit_states(rng, 5, 9):
        clean = forward(x, params, fig1a)
        noisy = noisy_forward(x, params, fig1a, cfg)
        assert abs(noisy.p0 - ((1 - 4 * P / 3) * clean.p0 + 2 * P / 3)) < 1e-12


def test_layer_wise_valid(rng, fig1a):
    params = init_params(fig1a, 4)
    cfg = NoiseConfig(P, G, Strategy.LAYER_WISE)
    x = unit_states(rng, 1, 9)[0]
    d = evolve_dm(x, params.orth_filters(), fig1a, cfg)
    assert abs(d.trace() - 1) < 1e-10
    assert np.linalg.eigvalsh(d.rho).min() >= -1e-9
    pred = noisy_forward(x, params, fig1a, cfg).dg_pred
    lo, hi = sorted((params.w0, params.w1))
    assert lo - 1e-12 <= pred <= hi + 1e-12


def test_single_qubit_toy():
    arch = toy_arch()
    params = init_params(arch, 0)
    cfg = NoiseConfig(0.3, 0.0, Strategy.FINAL_QUBIT)
    p = noisy_forward(np.array([1.0, 0.0]), params, arch, cfg)
    clean = forward(np.array([1.0, 0.0]), params, arch)
    assert p.p0 == pytest.approx((1 - 0.4) * clean.p0 + 0.2, abs=1e-14)


def test_memory_gate(rng):
    arch = builtin_arch("fig1f")
    params = init_params(arch, 0)
    x = unit_states(rng, 1, 12)
    with pytest.raises(MemoryGateError, match="allow-large-dm"):
        noisy_predict_batch(x, params, arch, NoiseConfig(strategy=Strategy.LAYER_WISE))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        NoiseConfig(depol_p=1.5)
    with pytest.raises(ValueError):
        NoiseConfig(strategy="sometimes")
    assert NoiseConfig(strategy="layer_wise").strategy is Strategy.LAYER_WISE


def test_kraus_blocks_match_kron(rng):
    a = rng.normal(size=(8, 8))
    rho = a @ a.T
    ops = [rng.normal(size=(2, 2)) for _ in range(3)]
    w = rng.uniform(size=3)
    for qubit in range(3):
        full = [np.kron(np.kron(np.eye(2**qubit), k), np.eye(2 ** (2 - qubit))) for k in ops]
        expected = sum(wi * f @ rho @ f.T for wi, f in zip(w, full))
        np.testing.assert_allclose(_kraus(rho, ops, qubit, w), expected, atol=1e-13)
