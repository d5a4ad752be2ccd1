import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import polar
from scipy.stats import ortho_group

from qcnnbind.errors import DuplicateQubitError, QubitRangeError, RankDeficiencyError, ShapeError
from qcnnbind.linalg import (
    OrthFilter,
    apply_filter,
    orthogonality_error,
    param_counts,
    polar_backward,
    project_orthogonal,
)
from qcnnbind.trainer import polar_increment


def test_projection_examples():
    np.testing.assert_array_equal(project_orthogonal(np.eye(4)).q, np.eye(4))
    np.testing.assert_allclose(project_orthogonal(np.diag([2.0, 3.0])).q, np.eye(2), atol=1e-15)
    q = project_orthogonal(np.array([[0.0, 2.0], [-3.0, 0.0]])).q
    np.testing.assert_allclose(q, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-15)


def test_projection_matches_scipy_polar(rng):
    for m in (1, 2, 3, 4, 5):
        raw = rng.uniform(size=(2**m, 2**m))
        np.testing.assert_allclose(project_orthogonal(raw).q, polar(raw)[0], atol=1e-10)


def test_projection_orthogonal_and_idempotent(rng):
    for m in (3, 4, 5):
        for _ in range(20):
            f = project_orthogonal(rng.uniform(size=(2**m, 2**m)))
            assert f.m == m
            assert orthogonality_error(f.q) <= 1e-10
            np.testing.assert_allclose(project_orthogonal(f.q).q, f.q, atol=1e-10)


def test_projection_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        project_orthogonal(np.ones((4, 4)))
    with pytest.raises(ShapeError):
        project_orthogonal(np.ones((2, 3)))


def test_nearest_orthogonal_spot_check(rng):
    raw = rng.uniform(size=(4, 4))
    best = np.linalg.norm(raw - project_orthogonal(raw).q)
    others = ortho_group.rvs(4, size=1000, random_state=7)
    assert all(best <= np.linalg.norm(raw - q) for q in others)


def test_polar_backward_finite_difference(rng):
    # directional derivative of <G, polar(M)> along a random direction E
    raw = rng.uniform(size=(8, 8))
    g, e = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
    h = 1e-6
    fd = (np.sum(g * project_orthogonal(raw + h * e).q) - np.sum(g * project_orthogonal(raw - h * e).q)) / (2 * h)
    assert abs(np.sum(polar_backward(raw, g) * e) - fd) < 1e-7


def test_polar_backward_orthogonal_to_scaling(rng):
    raw = rng.uniform(size=(16, 16))
    assert abs(np.sum(polar_backward(raw, rng.normal(size=(16, 16))) * raw)) < 1e-8


def test_polar_increment_matches_svd(rng):
    raw = rng.uniform(size=(8, 8))
    q0 = project_orthogonal(raw).q
    p = q0.T @ raw
    p_sym = (p + p.T) / 2
    lam, vecs = np.linalg.eigh(p_sym)
    d = rng.normal(size=(8, 8)) * 1e-3
    z = polar_increment(p_sym, lam, vecs, p - p_sym + d)
    np.testing.assert_allclose(q0 @ (np.eye(8) + z), project_orthogonal(raw + q0 @ d).q, atol=1e-13)


# -- filter application ----------------------------------------------------

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_apply_examples():
    e0 = np.array([1.0, 0, 0, 0])
    np.testing.assert_array_equal(apply_filter(e0, SWAP, [0]), [0, 0, 1, 0])
    np.testing.assert_array_equal(apply_filter(e0, SWAP, [1]), [0, 1, 0, 0])
    np.testing.assert_array_equal(apply_filter(e0, OrthFilter(np.eye(4)), [1, 0]), e0)


def test_apply_first_qubit_is_msb(rng):
    # one-hot input |a b c>, filter on (2, 0) sees row index 2*c + a
    m = rng.normal(size=(4, 4))
    for idx in range(8):
        a, b, c = (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
        out = apply_filter(np.eye(8)[idx], m, [2, 0])
        for c2 in (0, 1):
            for a2 in (0, 1):
                assert out[(a2 << 2) | (b << 1) | c2] == m[2 * c2 + a2, 2 * c + a]


def test_apply_batch(rng):
    x = rng.normal(size=(5, 16))
    q = ortho_group.rvs(8, random_state=1)
    batch = apply_filter(x, q, [3, 1, 0])
    for i in range(5):
        np.testing.assert_array_equal(batch[i], apply_filter(x[i], q, [3, 1, 0]))


def test_apply_errors():
    with pytest.raises(DuplicateQubitError):
        apply_filter(np.ones(8), np.eye(4), [1, 1])
    with pytest.raises(QubitRangeError):
        apply_filter(np.ones(8), np.eye(4), [0, 3])
    with pytest.raises(ShapeError):
        apply_filter(np.ones(8), np.eye(4), [0])
    with pytest.raises(ShapeError):
        apply_filter(np.ones(6), np.eye(2), [0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.data())
def test_norm_preservation(n, data):
    m = data.draw(st.integers(1, n))
    qubits = data.draw(st.permutations(range(n)))[:m]
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    x = rng.normal(size=1 << n)
    q = project_orthogonal(rng.uniform(size=(2**m, 2**m))).q
    assert abs(np.linalg.norm(apply_filter(x, q, qubits)) - np.linalg.norm(x)) <= 1e-12 * np.linalg.norm(x) + 1e-12


def test_composition_consistency(rng):
    # on qubits (a, b) with M equals on (b, a) with the bit-swapped M
    m = rng.normal(size=(4, 4))
    swap_bits = np.eye(4)[[0, 2, 1, 3]]
    x = rng.normal(size=32)
    np.testing.assert_allclose(apply_filter(x, m, [1, 4]), apply_filter(x, swap_bits @ m @ swap_bits, [4, 1]),
                               atol=1e-14)


def test_param_counts():
    assert param_counts([5, 5]) == (2050, 994)
    assert param_counts([5, 5, 4]) == (2306, 1114)
    assert param_counts([3, 3, 3, 3]) == (258, 114)
