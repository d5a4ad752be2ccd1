"""Train on a teacher-labelled synthetic set and write report files.

Run: python demos/03_train_synthetic.py [output_dir]
"""
import sys
from pathlib import Path

from qcnnbind import metrics, storage
from qcnnbind.circuit import builtin_arch
from qcnnbind.ingest import synth_dataset
from qcnnbind.trainer import TrainConfig, train

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_run")

# Labels come from a hidden network with the same wiring plus Gaussian noise.
data = synth_dataset(seed=7, count=512)
train_set, test_set = data[:384], data[384:]
print(f"{len(train_set)} train / {len(test_set)} test samples")

arch = builtin_arch("fig1a")
config = TrainConfig(lr=1e-3, momentum=0.9, batch_size=32, steps=2000, seed=7, eval_interval=250)
run = train(train_set, test_set, arch, config)

for step, value in run.trajectory:
    print(f"step {step:5d}  train RMSD {value:.4f}")
print()
print(run.summary())

metrics.emit_reports(run, out)
storage.write_checkpoint(out / "checkpoint.qckpt", arch, run.params)
print(f"wrote predictions.csv, trajectory.csv, summary.txt and checkpoint.qckpt to {out}/")
