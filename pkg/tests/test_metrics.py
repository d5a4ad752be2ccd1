import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcnnbind import metrics as M
from qcnnbind.errors import DomainError, UndefinedCorrelationError


def test_rmsd_examples():
    assert M.rmsd([1, 2, 3], [1, 2, 3]) == 0.0
    assert M.rmsd([0, 0], [3, -1]) == pytest.approx(math.sqrt(5), abs=1e-15)
    y = np.array([1.0, -2.0, 4.0])
    assert M.rmsd(y - 2.5, y) == pytest.approx(2.5, abs=1e-15)
    with pytest.raises(DomainError):
        M.rmsd([], [])
    with pytest.raises(DomainError):
        M.rmsd([1, 2], [1])


def test_pcc_examples():
    y = np.array([1.0, 4.0, 2.0, 8.0])
    assert M.pcc(y, y) == pytest.approx(1.0, abs=1e-15)
    assert abs(M.pcc(3 * y + 7, y) - 1.0) < 1e-12
    assert M.pcc([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(UndefinedCorrelationError):
        M.pcc([1, 1, 1], [1, 2, 3])
    assert math.isnan(M.evaluate([1, 1], [1, 2]).pcc)


# forming a*x + b itself rounds away ~ulp(b)/a of the spread; keep b/a modest
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100), st.floats(-10, 10))
def test_pcc_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=20), rng.normal(size=20)
    r = M.pcc(x, y)
    assert abs(M.pcc(a * x + b, y) - r) < 1e-12
    assert abs(M.pcc(-a * x + b, y) + r) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_rmsd_triangle(seed):
    x, y, z = np.random.default_rng(seed).normal(size=(3, 15))
    assert M.rmsd(x, z) <= M.rmsd(x, y) + M.rmsd(y, z) + 1e-12


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_roundtrip_lossless(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "p.csv"
    ids = [f"s{i}" for i in range(len(values))]
    M.write_predictions(path, ids, values, values[::-1])
    got_ids, true, pred = M.read_predictions(path)
    assert got_ids == ids
    assert true.tobytes() == np.array(values, dtype=float).tobytes()
    assert pred.tobytes() == np.array(values[::-1], dtype=float).tobytes()


def test_trajectory_files(tmp_path):
    M.write_trajectory(tmp_path / "t.csv", [])
    assert (tmp_path / "t.csv").read_text() == "step,train_rmsd\n"
    M.write_trajectory(tmp_path / "u.csv", [(100, 1.25), (200, 0.1)])
    assert M.read_trajectory(tmp_path / "u.csv") == [(100, 1.25), (200, 0.1)]


def test_mean_std_constant():
    assert M.mean_std([2.5] * 4) == (2.5, 0.0)


def test_summary_table_shape():
    rows = [{"arch": "fig1c", "n_qubits": 9, "label": "5+5", "n_par": (2050, 994),
             "train": [M.Metrics(1.0, 0.5), M.Metrics(2.0, 0.7)],
             "test": [M.Metrics(2.0, 0.6), M.Metrics(2.0, 0.6)]}]
    text = M.summary_table(rows)
    assert "2050 (994)" in text and "1.50 ± 0.50" in text and "0.600 ± 0.000" in text
