"""Noise-free statevector evaluation of the convolutional circuit.

A circuit is an ordered list of dense filters, each acting on a few qubits.
Information is funnelled into qubit 0, whose ``|0>`` / ``|1>`` probabilities
are combined linearly into a binding free energy::

    dg = w0 * p0 + w1 * p1
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (
    ArityMismatchError,
    ConfigurationError,
    DuplicateQubitError,
    EncodingLengthError,
    FunnelError,
    MeasuredQubitError,
    ParseError,
    QubitRangeError,
    ShapeError,
    WiringError,
)
from .linalg import contract, count_params, n_qubits_of, project_orthogonal

BUILTIN_NAMES = ("fig1a", "fig1b", "fig1c", "fig1f", "fig1g")


@dataclass(frozen=True)
class Layer:
    arity: int
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    n_qubits: int
    layers: tuple[Layer, ...]
    measured_qubit: int = 0

    @property
    def arities(self) -> list[int]:
        return [layer.arity for layer in self.layers]

    @property
    def label(self) -> str:
        return "+".join(str(m) for m in self.arities)


@dataclass
class ModelParams:
    raw_filters: list[np.ndarray]
    readout: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def w0(self) -> float:
        return float(self.readout[0])

    @property
    def w1(self) -> float:
        return float(self.readout[1])

    def copy(self) -> "ModelParams":
        return ModelParams([f.copy() for f in self.raw_filters], self.readout.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([f.ravel() for f in self.raw_filters] + [self.readout])

    @classmethod
    def from_flat(cls, vec, like: "ModelParams") -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        out, pos = [], 0
        for f in like.raw_filters:
            out.append(vec[pos:pos + f.size].reshape(f.shape).copy())
            pos += f.size
        return cls(out, vec[pos:pos + 2].copy())

    def zeros_like(self) -> "ModelParams":
        return ModelParams([np.zeros_like(f) for f in self.raw_filters], np.zeros(2))

    def orth_filters(self) -> list[np.ndarray]:
        return [project_orthogonal(f).q for f in self.raw_filters]


@dataclass(frozen=True)
class Prediction:
    p0: float
    p1: float
    dg_pred: float


# -- architecture text format ----------------------------------------------

_ARCH_RE = re.compile(r"^\s*arch\s+([A-Za-z0-9_.\-]+)\s*\{(.*)\}\s*$", re.S)
_FILTER_RE = re.compile(r"^filter\s+(\d+)\s+on\s+\[([^\]]*)\]$")


def parse_arch(text: str) -> ArchitectureSpec:
    """Parse ``arch <name> { qubits <n>; filter <m> on [i, ...]; ...; measure 0 }``."""
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    m = _ARCH_RE.match(body)
    if not m:
        raise ParseError("expected 'arch <name> { ... }'")
    name, inner = m.group(1), m.group(2)
    n_qubits, measured, layers = None, None, []
    for stmt in (s.strip() for s in inner.split(";")):
        if not stmt:
            continue
        stmt = " ".join(stmt.split())
        fm = _FILTER_RE.match(stmt)
        try:
            if fm:
                idx = tuple(int(t) for t in fm.group(2).split(",") if t.strip())
                layers.append(Layer(int(fm.group(1)), idx))
            elif stmt.startswith("qubits "):
                n_qubits = int(stmt.split()[1])
            elif stmt.startswith("measure "):
                measured = int(stmt.split()[1])
            else:
                raise ParseError(f"unknown statement {stmt!r}")
        except (ValueError, IndexError):
            raise ParseError(f"malformed statement {stmt!r}") from None
    if n_qubits is None:
        raise ParseError(f"arch {name!r} lacks a 'qubits' statement")
    return ArchitectureSpec(name, n_qubits, tuple(layers), 0 if measured is None else measured)


def format_arch(arch: ArchitectureSpec) -> str:
    lines = [f"arch {arch.name} {{", f"    qubits {arch.n_qubits};"]
    for layer in arch.layers:
        lines.append(f"    filter {layer.arity} on [{', '.join(map(str, layer.qubits))}];")
    lines.append(f"    measure {arch.measured_qubit}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_arch(path) -> ArchitectureSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_arch(fh.read())


def builtin_arch(name: str) -> ArchitectureSpec:
    if name not in BUILTIN_NAMES:
        raise ConfigurationError(f"unknown architecture {name!r}; builtins are {', '.join(BUILTIN_NAMES)}")
    text = resources.files(__package__).joinpath("archs").joinpath(f"{name}.arch").read_text(encoding="utf-8")
    return parse_arch(text)


def builtin_archs() -> list[ArchitectureSpec]:
    return [builtin_arch(name) for name in BUILTIN_NAMES]


# Published (total, independent) counts for the builtin wirings. The fig1a
# independent figure disagrees with 4 * 28 + 2 = 114 from the formula; it would
# match if only three of the four filters were counted.
REFERENCE_COUNTS = {
    "fig1a": (258, 86),
    "fig1b": (578, 270),
    "fig1c": (2050, 994),
    "fig1f": (834, 390),
    "fig1g": (2306, 1114),
}


def count_discrepancy(arch: ArchitectureSpec) -> str | None:
    """Note when the computed counts differ from the published reference, else ``None``."""
    ref = REFERENCE_COUNTS.get(arch.name)
    got = count_params(arch)
    if ref is None or ref == got:
        return None
    return (f"{arch.name}: computed {got[0]} ({got[1]}) differs from reference "
            f"{ref[0]} ({ref[1]}); computed value reported")


def resolve_arch(name_or_path: str) -> ArchitectureSpec:
    if name_or_path in BUILTIN_NAMES:
        return builtin_arch(name_or_path)
    return load_arch(name_or_path)


def validate_arch(arch: ArchitectureSpec, encoding_length: int | None = None) -> None:
    """Raise a specific ``WiringError`` subclass on the first violation found."""
    n = arch.n_qubits
    if n < 1:
        raise QubitRangeError(f"arch {arch.name!r} needs at least one qubit")
    if arch.measured_qubit != 0:
        raise MeasuredQubitError(f"measured qubit must be 0, got {arch.measured_qubit}")
    if not arch.layers:
        raise WiringError(f"arch {arch.name!r} has no filters")
    for i, layer in enumerate(arch.layers):
        if layer.arity != len(layer.qubits):
            raise ArityMismatchError(
                f"layer {i}: arity {layer.arity} but {len(layer.qubits)} qubit indices"
            )
        if len(set(layer.qubits)) != len(layer.qubits):
            raise DuplicateQubitError(f"layer {i}: duplicate qubit indices {list(layer.qubits)}")
        bad = [q for q in layer.qubits if not 0 <= q < n]
        if bad:
            raise QubitRangeError(f"layer {i}: indices {bad} outside [0, {n - 1}]")
    if arch.measured_qubit not in arch.layers[-1].qubits:
        raise FunnelError(f"final layer of {arch.name!r} does not act on qubit {arch.measured_qubit}")
    if encoding_length is not None and encoding_length != 1 << n:
        raise EncodingLengthError(
            f"arch {arch.name!r} expects length {1 << n}, encoding has length {encoding_length}"
        )


# -- evaluation ------------------------------------------------------------

def evolve(states, qs, arch: ArchitectureSpec):
    """Apply orthogonal filter matrices ``qs`` layer by layer."""
    out = np.asarray(states, dtype=float)
    for q, layer in zip(qs, arch.layers):
        out = contract(out, q, layer.qubits)
    return out


def measure_p0(states):
    """Probability of reading 0 on qubit 0: squared norm of the first half."""
    states = np.asarray(states)
    half = states.shape[-1] // 2
    return np.sum(states[..., :half] ** 2, axis=-1)


def readout(p0, params: ModelParams):
    p0 = np.asarray(p0, dtype=float)
    return params.readout[0] * p0 + params.readout[1] * (1.0 - p0)


def _check_inputs(states, params, arch):
    validate_arch(arch, np.shape(states)[-1])
    if len(params.raw_filters) != len(arch.layers):
        raise ShapeError(f"{len(params.raw_filters)} filters for {len(arch.layers)} layers")
    for f, layer in zip(params.raw_filters, arch.layers):
        if np.shape(f) != (2**layer.arity,) * 2:
            raise ShapeError(f"filter shape {np.shape(f)} does not match arity {layer.arity}")


def sample_p0(p0, shots: int, rng: np.random.Generator):
    """Finite-shot estimate of ``p0`` from a seeded binomial sampler."""
    return rng.binomial(shots, np.clip(p0, 0.0, 1.0)) / shots


def predict_p0(states, params: ModelParams, arch: ArchitectureSpec):
    _check_inputs(states, params, arch)
    return measure_p0(evolve(states, params.orth_filters(), arch))


def predict_batch(states, params: ModelParams, arch: ArchitectureSpec, shots=None, rng=None):
    p0 = predict_p0(states, params, arch)
    if shots:
        p0 = sample_p0(p0, shots, rng if rng is not None else np.random.default_rng(0))
    return readout(p0, params)


def forward(state, params: ModelParams, arch: ArchitectureSpec, shots=None, rng=None) -> Prediction:
    amps = getattr(state, "amplitudes", state)
    p0 = float(predict_p0(np.asarray(amps, dtype=float)[None, :], params, arch)[0])
    if shots:
        p0 = float(sample_p0(p0, shots, rng if rng is not None else np.random.default_rng(0)))
    p1 = 1.0 - p0
    return Prediction(p0, p1, params.w0 * p0 + params.w1 * p1)


def block_parallel_apply(states, u_bind) -> list[np.ndarray]:
    """Evaluate ``u_bind`` on ``2**m`` inputs at once via one block-diagonal operator.

    The inputs are stacked into a single ``2**(m+n)`` register (scaled to unit
    total weight); ``u_bind`` then acts on the low ``n`` qubits while the ``m``
    index qubits see the identity.
    """
    states = [np.asarray(s, dtype=float) for s in states]
    count = len(states)
    if count == 0 or count & (count - 1):
        raise ShapeError(f"number of states must be a power of two, got {count}")
    u_bind = np.asarray(u_bind, dtype=float)
    dim = u_bind.shape[0]
    if u_bind.shape != (dim, dim) or any(s.shape != (dim,) for s in states):
        raise ShapeError("all states must have the length of u_bind")
    m = count.bit_length() - 1
    n = n_qubits_of(np.empty(dim))
    scale = np.sqrt(count)
    register = np.concatenate(states) / scale
    out = contract(register, u_bind, range(m, m + n)) * scale
    return list(out.reshape(count, dim))
