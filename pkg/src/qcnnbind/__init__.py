"""Quantum convolutional network simulator for protein-ligand binding free energy."""
from .errors import QCNNError
from .circuit import (
    REFERENCE_COUNTS,
    ArchitectureSpec,
    Layer,
    ModelParams,
    Prediction,
    builtin_arch,
    builtin_archs,
    count_discrepancy,
    forward,
    predict_batch,
    validate_arch,
)
from .ingest import EncodedState, encode_complex, parse_complex, pkd_to_dg, synth_dataset
from .linalg import apply_filter, count_params, project_orthogonal
from .noise import NoiseConfig, noisy_forward
from .trainer import TrainConfig, init_params, sweep, train

__version__ = "0.1.0"
