"""Regression statistics and report files."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, UndefinedCorrelationError

PREDICTIONS_HEADER = ("id", "dg_true", "dg_pred")
TRAJECTORY_HEADER = ("step", "train_rmsd")


@dataclass(frozen=True)
class Metrics:
    rmsd: float
    pcc: float


def _pair(preds, labels, min_len=1):
    p = np.asarray(preds, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if p.shape != y.shape:
        raise DomainError(f"length mismatch: {p.size} predictions, {y.size} labels")
    if p.size < min_len:
        raise DomainError(f"need at least {min_len} pairs, got {p.size}")
    return p, y


def mse(preds, labels) -> float:
    p, y = _pair(preds, labels)
    return float(np.mean((p - y) ** 2))


def rmsd(preds, labels) -> float:
    return math.sqrt(mse(preds, labels))


def pcc(preds, labels) -> float:
    """Pearson correlation; raises when either input has zero variance."""
    p, y = _pair(preds, labels, min_len=2)
    dp, dy = p - p.mean(), y - y.mean()
    sp, sy = float(dp @ dp), float(dy @ dy)
    if sp == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant input")
    r = float(dp @ dy) / math.sqrt(sp * sy)
    return max(-1.0, min(1.0, r))


def evaluate(preds, labels) -> Metrics:
    try:
        r = pcc(preds, labels)
    except UndefinedCorrelationError:
        r = float("nan")
    return Metrics(rmsd(preds, labels), r)


def fmt(x: float) -> str:
    """17 significant digits: lossless for float64."""
    return f"{x:.16e}"


def write_predictions(path, ids, dg_true, dg_pred) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PREDICTIONS_HEADER)
            for i, t, p in zip(ids, dg_true, dg_pred):
                w.writerow((i, fmt(float(t)), fmt(float(p))))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_predictions(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != PREDICTIONS_HEADER:
        raise ValueError(f"{path}: expected header {','.join(PREDICTIONS_HEADER)}")
    ids = [r[0] for r in rows[1:]]
    return ids, np.array([float(r[1]) for r in rows[1:]]), np.array([float(r[2]) for r in rows[1:]])


def write_trajectory(path, trajectory) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_HEADER)
            for step, value in trajectory:
                w.writerow((int(step), fmt(float(value))))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_trajectory(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return [(int(r[0]), float(r[1])) for r in rows[1:]]


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation."""
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std())


def _ms(values, digits):
    m, s = mean_std(values)
    return f"{m:.{digits}f} ± {s:.{digits}f}"


def summary_table(rows) -> str:
    """Table-I-shaped block from dicts with arch, n_qubits, label, n_par, train/test Metrics lists."""
    head = f"{'arch':<8}{'N_qubit':>8}  {'Qfilter':<10}{'N_par':>14}  " \
           f"{'train RMSD':>16}{'train PCC':>18}{'test RMSD':>16}{'test PCC':>18}"
    lines = [head, "-" * len(head)]
    notes = []
    for row in rows:
        tr, te = row["train"], row["test"]
        npar = f"{row['n_par'][0]} ({row['n_par'][1]})"
        if row.get("flag"):
            npar += "*"
            notes.append("* " + row["flag"])
        lines.append(
            f"{row['arch']:<8}{row['n_qubits']:>8}  {row['label']:<10}{npar:>14}  "
            f"{_ms([m.rmsd for m in tr], 2):>16}{_ms([m.pcc for m in tr], 3):>18}"
            f"{_ms([m.rmsd for m in te], 2):>16}{_ms([m.pcc for m in te], 3):>18}"
        )
    return "\n".join(lines + notes) + "\n"


def emit_reports(run, out_dir) -> list[Path]:
    """Write ``predictions.csv``, ``trajectory.csv`` and ``summary.txt`` for a run record."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = [out / "predictions.csv", out / "trajectory.csv", out / "summary.txt"]
    ids, true, pred = run.test_predictions
    write_predictions(paths[0], ids, true, pred)
    write_trajectory(paths[1], run.trajectory)
    try:
        paths[2].write_text(run.summary(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {paths[2]}: {exc}") from exc
    return paths
