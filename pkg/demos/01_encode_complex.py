"""From atom coordinates to a 9-qubit amplitude vector.

Run: python demos/01_encode_complex.py
"""
import numpy as np

from qcnnbind.ingest import (
    downsample,
    format_complex,
    normalize_encode,
    occupancy,
    parse_complex,
    pkd_to_dg,
    random_complex,
    voxelize,
)

# The occupancy kernel: Gaussian core, quadratic tail, zero beyond 1.5 radii.
r = np.array([0.0, 0.5, 1.0, 1.25, 1.5])
print("r / r_vdw :", r)
print("occupancy :", np.round(occupancy(r), 6))

# A complex file is plain text: a pKd header and one atom per line.
text = """\
pkd 6.0
# role element x y z
L C  0.0  0.0  0.0
L O  1.2  0.0  0.0
L N -1.1  0.6  0.0
P C  4.0  1.0  0.5
P O -3.5  2.0 -1.0
P S  0.5 -4.0  1.5
P H  0.5 -4.9  1.5
"""
sample = parse_complex(text, "toy")
print(f"\nparsed {len(sample.atoms)} heavy atoms (hydrogen dropped), pkd {sample.pkd}")
print(f"label: dG = {pkd_to_dg(sample.pkd):.3f} kcal/mol")

# 32^3 grid at 0.5 A around the ligand centroid, 8 channels (ligand C N O other, protein C N O other).
grid = voxelize(sample)
print("\nfull grid", grid.values.shape, "spacing", grid.spacing)
for c, name in enumerate(["L-C", "L-N", "L-O", "L-X", "P-C", "P-N", "P-O", "P-X"]):
    print(f"  {name}: sum {grid.values[c].sum():8.3f}  max {grid.values[c].max():.3f}")

# Max-pool to 4^3 and normalise each role to a squared sum of 0.5.
pooled = downsample(grid, 4)
state = normalize_encode(pooled, pkd_to_dg(sample.pkd), sample.id)
a = state.amplitudes
print(f"\nencoded length {a.size} = 2^{state.n_qubits}")
print(f"ligand half |a|^2 = {a[:256] @ a[:256]:.6f}, protein half |a|^2 = {a[256:] @ a[256:]:.6f}")

# The synthetic generator makes pocket-like complexes in the same text format.
synthetic = random_complex(np.random.default_rng(0), "synthetic")
print("\nfirst lines of a synthetic complex file:")
print("\n".join(format_complex(synthetic).splitlines()[:4]))
