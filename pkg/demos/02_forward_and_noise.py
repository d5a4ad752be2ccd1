"""One forward pass through the 3+3+3+3 network, clean and noisy.

Run: python demos/02_forward_and_noise.py
"""
import numpy as np

from qcnnbind.circuit import builtin_arch, format_arch, forward
from qcnnbind.ingest import synth_dataset
from qcnnbind.linalg import count_params, orthogonality_error
from qcnnbind.metrics import pcc
from qcnnbind.noise import NoiseConfig, Strategy, noisy_forward, noisy_predict_batch
from qcnnbind.trainer import init_params, predict, stack

arch = builtin_arch("fig1a")
print(format_arch(arch))
total, independent = count_params(arch)
print(f"{total} stored parameters, {independent} independent\n")

# Raw filters are unconstrained; each layer uses their nearest orthogonal matrix.
params = init_params(arch, seed=0)
for i, q in enumerate(params.orth_filters()):
    print(f"filter {i}: {q.shape}, |q^T q - I|_max = {orthogonality_error(q):.1e}")

states = synth_dataset(seed=1, count=40)
p = forward(states[0], params, arch)
print(f"\nclean:  p0 = {p.p0:.6f}  dG = {p.dg_pred:.4f}")

cfg = NoiseConfig(depol_p=0.05, phase_gamma=0.03, strategy=Strategy.FINAL_QUBIT)
n = noisy_forward(states[0], params, arch, cfg)
print(f"noisy:  p0 = {n.p0:.6f}  dG = {n.dg_pred:.4f}")
print(f"(1 - 4p/3) p0 + 2p/3 = {(1 - 4 * 0.05 / 3) * p.p0 + 2 * 0.05 / 3:.6f}")

# Noise on the measured qubit only is an affine map of p0, so correlation survives.
X, y, _ = stack(states)
clean = predict(params, X, arch)
for strategy in Strategy:
    noisy = noisy_predict_batch(X, params, arch, NoiseConfig(0.05, 0.03, strategy))
    print(f"{strategy.value:<12} PCC vs labels {pcc(noisy, y):+.6f}   (clean {pcc(clean, y):+.6f})")
