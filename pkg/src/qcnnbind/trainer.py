"""Minibatch SGD with classical momentum on raw filter entries and readout weights."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics as M
from .errors import ConfigurationError, DomainError, QCNNError, ShapeError
from .circuit import ArchitectureSpec, ModelParams, _check_inputs, count_discrepancy, measure_p0, readout
from .linalg import contract, count_params, from_front, polar_backward, project_orthogonal, to_front

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    steps: int = 10_000
    epochs: int | None = None
    seed: int = 0
    init_low: float = 0.0
    init_high: float = 1.0
    eval_interval: int = 100
    grad_mode: str = "analytic"

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigurationError("lr must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.steps < 1 or self.eval_interval < 1:
            raise ConfigurationError("batch_size, steps and eval_interval must be >= 1")
        if self.epochs is not None and self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.grad_mode not in ("analytic", "fd"):
            raise ConfigurationError("grad_mode must be 'analytic' or 'fd'")

    def resolved_steps(self, n_train: int) -> int:
        if self.epochs is None:
            return self.steps
        return self.epochs * math.ceil(n_train / self.batch_size)


def init_params(arch: ArchitectureSpec, seed: int, low: float = 0.0, high: float = 1.0) -> ModelParams:
    rng = np.random.default_rng(seed)
    filters = [rng.uniform(low, high, size=(2**layer.arity,) * 2) for layer in arch.layers]
    return ModelParams(filters, rng.uniform(low, high, size=2))


def stack(states):
    """``(X, y, ids)`` arrays from a list of encoded states."""
    if not states:
        return np.empty((0, 0)), np.empty(0), []
    X = np.stack([np.asarray(s.amplitudes, dtype=float) for s in states])
    y = np.array([s.label_dg for s in states], dtype=float)
    return X, y, [s.id for s in states]


def loss(preds, labels) -> float:
    return M.mse(preds, labels)


def _as_arrays(batch, labels):
    if labels is None:
        X, y, _ = stack(list(batch))
    else:
        X, y = np.asarray(batch, dtype=float), np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("batch must be non-empty")
    return X, y


def grad(params: ModelParams, batch, arch: ArchitectureSpec, labels=None):
    """Batch MSE and its exact gradient, congruent to ``params``.

    ``batch`` is either a list of encoded states or an amplitude array paired
    with ``labels``.
    """
    X, y = _as_arrays(batch, labels)
    _check_inputs(X, params, arch)
    qs = params.orth_filters()
    xs = [X]
    for q, layer in zip(qs, arch.layers):
        xs.append(contract(xs[-1], q, layer.qubits))
    p0 = measure_p0(xs[-1])
    pred = readout(p0, params)
    resid = pred - y
    g = 2.0 * resid / len(y)

    g_read = np.array([g @ p0, g @ (1.0 - p0)])
    d_p0 = g * (params.w0 - params.w1)
    half = X.shape[1] // 2
    upstream = np.zeros_like(xs[-1])
    upstream[:, :half] = 2.0 * xs[-1][:, :half] * d_p0[:, None]

    n = arch.n_qubits
    g_filters = [None] * len(qs)
    for k in range(len(qs) - 1, -1, -1):
        qubits = arch.layers[k].qubits
        xf = to_front(xs[k], qubits, n)
        gf = to_front(upstream, qubits, n)
        d_q = np.einsum("bir,bjr->ij", gf, xf)
        g_filters[k] = polar_backward(params.raw_filters[k], d_q)
        if k:
            upstream = from_front(np.matmul(qs[k].T, gf), qubits, n)
    return float(np.mean(resid**2)), ModelParams(g_filters, g_read)


def batch_loss(params: ModelParams, X, y, arch: ArchitectureSpec) -> float:
    p0 = measure_p0(_evolve_checked(X, params, arch))
    return float(np.mean((readout(p0, params) - y) ** 2))


def _evolve_checked(X, params, arch):
    out = X
    for f, layer in zip(params.raw_filters, arch.layers):
        out = contract(out, project_orthogonal(f).q, layer.qubits)
    return out


def polar_increment(p_sym, lam, vecs, d, iters=8):
    """Small ``Z`` with ``polar(q0 @ (p_sym + d)) = q0 @ (I + Z)`` for orthogonal ``q0``.

    ``p_sym = vecs @ diag(lam) @ vecs.T`` is symmetric positive definite and
    ``d`` is small. Only increments are ever formed, so ``Z`` keeps full
    relative precision even when ``p_sym`` is poorly conditioned.
    """
    n = len(lam)
    eye = np.eye(n)
    den = lam[:, None] + lam[None, :]
    z = np.zeros((n, n))
    for _ in range(iters):
        # skew part of (I + Z)^T (P + D), with P symmetric dropped analytically
        k = d - d.T + z.T @ p_sym - p_sym @ z + z.T @ d - d.T @ z
        w = vecs @ ((vecs.T @ k @ vecs) / den) @ vecs.T
        z_new = z + w + z @ w
        z_new = z_new - (eye + z_new) @ (z_new + z_new.T + z_new.T @ z_new) / 2
        if np.array_equal(z_new, z):
            break
        z = z_new
    return z


def grad_fd(params: ModelParams, batch, arch: ArchitectureSpec, labels=None, h: float = 1e-5):
    """Central finite differences ``(L(theta + h e) - L(theta - h e)) / 2h`` per entry.

    Evaluated without catastrophic cancellation: the perturbed polar factors
    are carried as increments over the unperturbed one, and the loss
    difference is expanded as ``mean((r+ - r-) (r+ + r-))`` with
    ``p0+ - p0- = sum((x+ - x-) (x+ + x-))``. No derivative formulas are used,
    so this stays an independent check on :func:`grad`.
    """
    X, y = _as_arrays(batch, labels)
    _check_inputs(X, params, arch)
    qs = params.orth_filters()
    xs = [X]
    for q, layer in zip(qs, arch.layers):
        xs.append(contract(xs[-1], q, layer.qubits))
    b, half = len(y), X.shape[1] // 2
    w0, w1 = params.w0, params.w1
    p0 = measure_p0(xs[-1])
    r = w1 + (w0 - w1) * p0 - y

    grads = []
    for k, (raw, layer) in enumerate(zip(params.raw_filters, arch.layers)):
        q0 = qs[k]
        p = q0.T @ raw
        p_sym = (p + p.T) / 2
        lam, vecs = np.linalg.eigh(p_sym)
        dim = len(lam)
        g = np.empty(raw.shape)
        for i in range(dim):
            for j in range(dim):
                step = np.zeros((dim, dim))
                step[:, j] = h * q0[i, :]  # q0^T (h e_i e_j^T)
                z_up = polar_increment(p_sym, lam, vecs, p - p_sym + step)
                z_dn = polar_increment(p_sym, lam, vecs, p - p_sym - step)
                diff = contract(xs[k], q0 @ (z_up - z_dn), layer.qubits)
                tot = contract(xs[k], 2 * q0 + q0 @ (z_up + z_dn), layer.qubits)
                both = np.concatenate([diff, tot])
                for q2, l2 in zip(qs[k + 1:], arch.layers[k + 1:]):
                    both = contract(both, q2, l2.qubits)
                dx, sx = both[:b, :half], both[b:, :half]
                d_p0 = np.sum(dx * sx, axis=1)
                s_p0 = np.sum(sx * sx + dx * dx, axis=1) / 2
                d_r = (w0 - w1) * d_p0
                s_r = 2 * (w1 - y) + (w0 - w1) * s_p0
                g[i, j] = np.mean(d_r * s_r) / (2 * h)
        grads.append(g)
    # loss is quadratic in the readout weights; the same expansion applies
    g_read = np.array([np.mean(2 * h * p0 * 2 * r), np.mean(2 * h * (1 - p0) * 2 * r)]) / (2 * h)
    return float(np.mean(r**2)), ModelParams(grads, g_read)


def sgd_step(params: ModelParams, grads: ModelParams, velocity: ModelParams, lr: float, momentum: float):
    """``v <- momentum * v + g``; ``theta <- theta - lr * v``. Returns new (params, velocity)."""
    vel = ModelParams(
        [momentum * v + g for v, g in zip(velocity.raw_filters, grads.raw_filters)],
        momentum * velocity.readout + grads.readout,
    )
    new = ModelParams(
        [p - lr * v for p, v in zip(params.raw_filters, vel.raw_filters)],
        params.readout - lr * vel.readout,
    )
    return new, vel


def predict(params: ModelParams, X, arch: ArchitectureSpec):
    if len(X) == 0:
        return np.empty(0)
    return readout(measure_p0(_evolve_checked(X, params, arch)), params)


def _metrics(params, X, y, arch):
    if len(y) == 0:
        return None
    return M.evaluate(predict(params, X, arch), y)


def _batches(n, batch_size, rng):
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


@dataclass
class RunRecord:
    arch: str
    config: dict
    trajectory: list = field(default_factory=list)
    initial_train: M.Metrics | None = None
    initial_test: M.Metrics | None = None
    train: M.Metrics | None = None
    test: M.Metrics | None = None
    params: ModelParams | None = None
    train_predictions: tuple = ((), (), ())
    test_predictions: tuple = ((), (), ())
    n_par: tuple = (0, 0)
    wall_time: float = 0.0

    def summary(self) -> str:
        def fmt(m):
            return "n/a" if m is None else f"RMSD {m.rmsd:.4f}  PCC {m.pcc:.4f}"

        lines = [
            f"arch: {self.arch}",
            f"parameters: {self.n_par[0]} total, {self.n_par[1]} independent",
            "config: " + ", ".join(f"{k}={v}" for k, v in self.config.items()),
            f"initial train: {fmt(self.initial_train)}",
            f"initial test:  {fmt(self.initial_test)}",
            f"final train:   {fmt(self.train)}",
            f"final test:    {fmt(self.test)}",
        ]
        return "\n".join(lines) + "\n"


def train(train_set, test_set, arch: ArchitectureSpec, config: TrainConfig) -> RunRecord:
    if not train_set:
        raise DomainError("training set is empty")
    X, y, ids = stack(train_set)
    Xt, yt, ids_t = stack(test_set)
    for name, A in (("train", X), ("test", Xt)):
        if A.size and A.shape[1] != 1 << arch.n_qubits:
            raise ShapeError(
                f"{name} samples have length {A.shape[1]}; {arch.name} needs {1 << arch.n_qubits}"
            )
    steps = config.resolved_steps(len(y))
    grad_fn = grad if config.grad_mode == "analytic" else grad_fd

    t0 = time.perf_counter()
    params = init_params(arch, config.seed, config.init_low, config.init_high)
    velocity = params.zeros_like()
    record = RunRecord(arch.name, asdict(config) | {"resolved_steps": steps}, n_par=count_params(arch))
    record.initial_train = _metrics(params, X, y, arch)
    record.initial_test = _metrics(params, Xt, yt, arch)

    batches = _batches(len(y), config.batch_size, np.random.default_rng([config.seed, 1]))
    for step in range(1, steps + 1):
        idx = next(batches)
        _, g = grad_fn(params, X[idx], arch, labels=y[idx])
        params, velocity = sgd_step(params, g, velocity, config.lr, config.momentum)
        if step % config.eval_interval == 0:
            record.trajectory.append((step, M.rmsd(predict(params, X, arch), y)))

    record.params = params
    pred = predict(params, X, arch)
    pred_t = predict(params, Xt, arch)
    record.train = M.evaluate(pred, y)
    record.test = M.evaluate(pred_t, yt) if len(yt) else None
    record.train_predictions = (ids, y, pred)
    record.test_predictions = (ids_t, yt, pred_t)
    record.wall_time = time.perf_counter() - t0
    return record


@dataclass
class SweepResult:
    arch: ArchitectureSpec
    runs: list

    def row(self) -> dict:
        ok = [r for r in self.runs if r.train is not None]
        return {
            "arch": self.arch.name,
            "n_qubits": self.arch.n_qubits,
            "label": self.arch.label,
            "n_par": count_params(self.arch),
            "flag": count_discrepancy(self.arch),
            "train": [r.train for r in ok],
            "test": [r.test for r in ok if r.test is not None],
        }

    def summary(self) -> str:
        lines = [M.summary_table([self.row()]), "runs:"]
        for r in self.runs:
            tr = r.train
            te = r.test
            lines.append(
                f"  lr={r.config['lr']:g} seed={r.config['seed']}: "
                + ("failed" if tr is None else
                   f"train RMSD {tr.rmsd:.4f} PCC {tr.pcc:.4f}"
                   + ("" if te is None else f" | test RMSD {te.rmsd:.4f} PCC {te.pcc:.4f}"))
            )
        lines.append("values are mean ± std (population) over runs")
        return "\n".join(lines) + "\n"


def sweep(train_set, test_set, arch: ArchitectureSpec, lrs, seeds=(0,), base: TrainConfig | None = None) -> SweepResult:
    """One training run per (lr, seed) pair."""
    if not lrs:
        raise ConfigurationError("sweep needs at least one learning rate")
    base = base or TrainConfig()
    runs = []
    for lr in lrs:
        for seed in seeds:
            cfg = TrainConfig(**(asdict(base) | {"lr": float(lr), "seed": int(seed)}))
            try:
                runs.append(train(train_set, test_set, arch, cfg))
            except QCNNError as exc:
                log.warning("run lr=%g seed=%d failed: %s", lr, seed, exc)
                runs.append(RunRecord(arch.name, asdict(cfg)))
    return SweepResult(arch, runs)
