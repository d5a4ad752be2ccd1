"""Analytic gradients through the polar projection against finite differences.

Run: python demos/05_gradient_check.py
"""
import numpy as np

from qcnnbind.circuit import builtin_arch
from qcnnbind.trainer import grad, grad_fd, init_params, predict

rng = np.random.default_rng(3)
for name in ("fig1a", "fig1b", "fig1c"):
    arch = builtin_arch(name)
    params = init_params(arch, 0)
    x = rng.normal(size=(4, 2**arch.n_qubits))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = predict(params, x, arch) + rng.normal(size=4)

    loss, g = grad(params, x, arch, labels=y)
    _, f = grad_fd(params, x, arch, labels=y, h=1e-5)
    a, b = g.flat(), f.flat()
    rel = np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))
    print(f"{name}: loss {loss:8.4f}  {a.size} entries  max rel err {rel.max():.2e}")

    # Scaling a raw filter does not change its polar factor, so the gradient is orthogonal to it.
    print(f"        <M, dL/dM> per filter: {[f'{np.sum(m * gm):+.1e}' for m, gm in zip(params.raw_filters, g.raw_filters)]}")
