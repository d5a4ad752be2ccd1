"""Complex parsing, occupancy grids and amplitude encoding.

Input files use a minimal line-based format::

    pkd 6.0
    L C 0.0 0.0 0.0
    P O 1.0 0.0 0.0

Each atom line is ``role element x y z`` with role ``P`` (protein) or ``L``
(ligand) and coordinates in Angstrom. Hydrogens are dropped; elements other
than C, N and O collapse into a single ``Other`` class.
"""
from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateComplexError,
    DegenerateSampleError,
    DomainError,
    LabelMissingError,
    ParseError,
)

log = logging.getLogger(__name__)

GRID_SIDE = 32
GRID_SPACING = 0.5  # Angstrom; 32 * 0.5 = 16 A cube
N_CHANNELS = 8
# Voxel centers along one axis, symmetric about the ligand centroid.
VOXEL_CENTERS = (np.arange(GRID_SIDE) - (GRID_SIDE - 1) / 2.0) * GRID_SPACING

GAS_CONSTANT = 1.98720425864e-3  # kcal / (mol K)
TEMPERATURE = 298.15  # K


class Role(enum.IntEnum):
    LIGAND = 0
    PROTEIN = 1


class Element(enum.IntEnum):
    C = 0
    N = 1
    O = 2
    OTHER = 3


_VDW = {Element.C: 1.9, Element.N: 1.8, Element.O: 1.7, Element.OTHER: 2.0}
_ROLE_CODES = {"L": Role.LIGAND, "P": Role.PROTEIN}


@dataclass(frozen=True)
class AtomRecord:
    role: Role
    element: Element
    position: tuple[float, float, float]


@dataclass
class ComplexSample:
    id: str
    atoms: list[AtomRecord]
    pkd: float

    def coords(self, role: Role | None = None) -> np.ndarray:
        atoms = self.atoms if role is None else [a for a in self.atoms if a.role == role]
        return np.array([a.position for a in atoms], dtype=float).reshape(-1, 3)


@dataclass
class VoxelGrid:
    """Occupancy values with shape ``(8, side, side, side)``."""

    values: np.ndarray
    spacing: float

    @property
    def side(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass
class EncodedState:
    amplitudes: np.ndarray
    label_dg: float
    id: str = ""
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1


def classify_element(symbol: str) -> Element | None:
    """Map an element symbol to its class; ``None`` for hydrogen."""
    s = symbol.strip().capitalize()
    if s in ("H", "D"):
        return None
    try:
        return Element[s]
    except KeyError:
        return Element.OTHER


def parse_complex(text: str, sample_id: str = "") -> ComplexSample:
    pkd = None
    atoms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0].lower() == "pkd":
            if len(parts) != 2:
                raise ParseError("expected 'pkd <value>'", lineno)
            try:
                pkd = float(parts[1])
            except ValueError:
                raise ParseError(f"bad pkd value {parts[1]!r}", lineno) from None
            continue
        if len(parts) != 5:
            raise ParseError(f"expected 'role element x y z', got {len(parts)} fields", lineno)
        role = _ROLE_CODES.get(parts[0].upper())
        if role is None:
            raise ParseError(f"unknown role {parts[0]!r} (use P or L)", lineno)
        try:
            xyz = tuple(float(v) for v in parts[2:])
        except ValueError:
            raise ParseError("non-numeric coordinate", lineno) from None
        if not all(math.isfinite(v) for v in xyz):
            raise ParseError("non-finite coordinate", lineno)
        element = classify_element(parts[1])
        if element is None:
            continue
        atoms.append(AtomRecord(role, element, xyz))
    if pkd is None:
        raise LabelMissingError("missing 'pkd <value>' header")
    n_lig = sum(a.role == Role.LIGAND for a in atoms)
    if n_lig == 0 or n_lig == len(atoms):
        raise DegenerateComplexError(
            f"complex {sample_id!r} needs both protein and ligand heavy atoms"
        )
    return ComplexSample(sample_id, atoms, pkd)


def read_complex(path) -> ComplexSample:
    path = Path(path)
    return parse_complex(path.read_text(encoding="utf-8"), sample_id=path.stem)


def format_complex(sample: ComplexSample) -> str:
    lines = [f"pkd {sample.pkd!r}"]
    for a in sample.atoms:
        role = "L" if a.role == Role.LIGAND else "P"
        elem = "X" if a.element == Element.OTHER else a.element.name
        lines.append(f"{role} {elem} {a.position[0]!r} {a.position[1]!r} {a.position[2]!r}")
    return "\n".join(lines) + "\n"


def vdw_radius(element: Element) -> float:
    return _VDW[Element(element)]


def occupancy(r):
    """Piecewise atomic occupancy as a function of the distance/radius ratio.

    Accepts scalars or arrays; support ends at ``r = 1.5``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError("occupancy is defined for r >= 0")
    inner = np.exp(-2.0 * r * r)
    outer = ((3.0 - 2.0 * r) / math.e) ** 2
    out = np.where(r < 1.0, inner, np.where(r < 1.5, outer, 0.0))
    return float(out) if out.ndim == 0 else out


def channel_index(role: Role, element: Element) -> int:
    return 4 * int(Role(role)) + int(Element(element))


def ligand_centroid(sample: ComplexSample) -> np.ndarray:
    return sample.coords(Role.LIGAND).mean(axis=0)


_REACH = 6  # voxels; 1.5 * 2.0 A / 0.5 A
_OFFSETS = np.arange(-_REACH, _REACH + 1)


def voxelize(sample: ComplexSample) -> VoxelGrid:
    """Sum atomic occupancies on the 32^3 grid centred on the ligand centroid."""
    if not sample.atoms:
        return VoxelGrid(np.zeros((N_CHANNELS,) + (GRID_SIDE,) * 3), GRID_SPACING)
    xyz = sample.coords() - ligand_centroid(sample)
    radii = np.array([_VDW[a.element] for a in sample.atoms])
    chans = np.array([channel_index(a.role, a.element) for a in sample.atoms])

    # nearest voxel index per axis, then a fixed cube of neighbours around it
    half = (GRID_SIDE - 1) / 2.0
    nearest = np.rint(xyz / GRID_SPACING + half).astype(np.int64)
    idx = nearest[:, :, None] + _OFFSETS[None, None, :]  # (atoms, 3, 13)
    d = (idx - half) * GRID_SPACING - xyz[:, :, None]
    d2 = (
        d[:, 0, :, None, None] ** 2
        + d[:, 1, None, :, None] ** 2
        + d[:, 2, None, None, :] ** 2
    )
    r = np.sqrt(d2) / radii[:, None, None, None]
    occ = occupancy(r)

    inside = (idx >= 0) & (idx < GRID_SIDE)
    mask = inside[:, 0, :, None, None] & inside[:, 1, None, :, None] & inside[:, 2, None, None, :]
    mask &= occ > 0.0
    flat = (
        chans[:, None, None, None] * GRID_SIDE**3
        + idx[:, 0, :, None, None] * GRID_SIDE**2
        + idx[:, 1, None, :, None] * GRID_SIDE
        + idx[:, 2, None, None, :]
    )
    values = np.bincount(flat[mask], weights=occ[mask], minlength=N_CHANNELS * GRID_SIDE**3)
    return VoxelGrid(values.reshape((N_CHANNELS,) + (GRID_SIDE,) * 3), GRID_SPACING)


def downsample(grid: VoxelGrid, target_side: int) -> VoxelGrid:
    """Max-pool each channel over non-overlapping cubes."""
    if target_side not in (8, 4) or grid.side % target_side:
        raise ConfigurationError(f"unsupported pooled side {target_side}; use 8 or 4")
    k = grid.side // target_side
    c, s = grid.channels, target_side
    pooled = grid.values.reshape(c, s, k, s, k, s, k).max(axis=(2, 4, 6))
    return VoxelGrid(pooled, grid.spacing * k)


def normalize_encode(grid: VoxelGrid, label_dg: float, sample_id: str = "") -> EncodedState:
    """Scale ligand and protein channels to squared sums of 0.5 each and flatten."""
    v = np.array(grid.values, dtype=float)
    lig, prot = v[:4], v[4:]
    sl, sp = float(np.sum(lig * lig)), float(np.sum(prot * prot))
    if sl <= 0.0 or sp <= 0.0:
        raise DegenerateSampleError(
            f"sample {sample_id!r} has empty {'ligand' if sl <= 0.0 else 'protein'} occupancy"
        )
    v[:4] = lig * math.sqrt(0.5 / sl)
    v[4:] = prot * math.sqrt(0.5 / sp)
    return EncodedState(v.reshape(-1), float(label_dg), sample_id)


def pkd_to_dg(pkd: float) -> float:
    return -math.log(10.0) * GAS_CONSTANT * TEMPERATURE * pkd + 0.0  # no negative zero


def side_for_qubits(n_qubits: int) -> int:
    sides = {9: 4, 12: 8}
    if n_qubits not in sides:
        raise ConfigurationError(f"encodings use 9 or 12 qubits, not {n_qubits}")
    return sides[n_qubits]


def encode_complex(sample: ComplexSample, n_qubits: int = 9) -> EncodedState:
    grid = downsample(voxelize(sample), side_for_qubits(n_qubits))
    return normalize_encode(grid, pkd_to_dg(sample.pkd), sample.id)


def read_manifest(path) -> list[Path]:
    """Complex-file paths listed one per line; relative entries resolve against the manifest."""
    path = Path(path)
    base = path.parent
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        out.append(p if p.is_absolute() else base / p)
    return out


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QCNNBIND_WORKERS", "1")))
    except ValueError:
        return 1


def encode_files(paths, n_qubits: int = 9, workers: int | None = None):
    """Encode complex files in order; return ``(states, skipped)``.

    ``skipped`` lists ``(path, reason)`` for unreadable or degenerate inputs.
    """
    workers = workers or _workers()

    def one(p):
        try:
            return encode_complex(read_complex(p), n_qubits), None
        except (OSError, ParseError, DegenerateComplexError, DegenerateSampleError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, paths))
    else:
        results = [one(p) for p in paths]
    states, skipped = [], []
    for p, (state, reason) in zip(paths, results):
        if state is None:
            log.warning("skipping %s: %s", p, reason)
            skipped.append((str(p), reason))
        else:
            states.append(state)
    return states, skipped


# -- synthetic data ---------------------------------------------------------

_LIGAND_ELEMENTS = ([Element.C, Element.N, Element.O, Element.OTHER], [0.6, 0.15, 0.2, 0.05])
_PROTEIN_ELEMENTS = ([Element.C, Element.N, Element.O, Element.OTHER], [0.55, 0.18, 0.2, 0.07])


def random_complex(rng: np.random.Generator, sample_id: str = "") -> ComplexSample:
    """A ligand blob surrounded by a shell of pocket atoms."""
    n_lig = int(rng.integers(6, 21))
    n_prot = int(rng.integers(40, 91))
    lig = rng.normal(0.0, 1.5, size=(n_lig, 3))
    dirs = rng.normal(size=(n_prot, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    prot = dirs * rng.uniform(3.5, 8.5, size=(n_prot, 1)) + rng.normal(0.0, 0.5, size=3)
    lig_el = rng.choice(4, size=n_lig, p=_LIGAND_ELEMENTS[1])
    prot_el = rng.choice(4, size=n_prot, p=_PROTEIN_ELEMENTS[1])
    atoms = [AtomRecord(Role.LIGAND, Element(int(e)), tuple(map(float, x))) for e, x in zip(lig_el, lig)]
    atoms += [AtomRecord(Role.PROTEIN, Element(int(e)), tuple(map(float, x))) for e, x in zip(prot_el, prot)]
    return ComplexSample(sample_id, atoms, 0.0)


def _random_states(rng, count, n_qubits, prefix):
    side = side_for_qubits(n_qubits)
    states = []
    while len(states) < count:
        sample = random_complex(rng, f"{prefix}{len(states):06d}")
        try:
            grid = downsample(voxelize(sample), side)
            states.append(normalize_encode(grid, 0.0, sample.id))
        except DegenerateSampleError:
            continue
    return states


def synth_dataset(seed: int, count: int, n_qubits: int = 9, arch=None, sigma: float = 0.5,
                  center: float = -8.0, spread: float = 1.5) -> list[EncodedState]:
    """Random complexes labelled by a hidden teacher network plus Gaussian noise.

    The teacher shares the student's architecture (``fig1a`` for 9 qubits,
    ``fig1f`` for 12 unless given). Its readout weights are calibrated on a
    separate batch so teacher outputs have roughly mean ``center`` and standard
    deviation ``spread`` kcal/mol, independent of ``count``.
    """
    from . import circuit as fw  # local import keeps module load light

    if arch is None:
        arch = fw.builtin_arch("fig1a" if n_qubits == 9 else "fig1f")
    if arch.n_qubits != n_qubits:
        raise ConfigurationError("teacher architecture does not match n_qubits")
    if count <= 0:
        return []

    teacher_rng = np.random.default_rng([seed, 1])
    filters = [teacher_rng.uniform(0.0, 1.0, size=(2**layer.arity,) * 2) for layer in arch.layers]
    calib = _random_states(np.random.default_rng([seed, 2]), 32, n_qubits, "calib-")
    teacher = fw.ModelParams(filters, np.zeros(2))
    p0 = fw.predict_p0(np.stack([s.amplitudes for s in calib]), teacher, arch)
    std = float(np.std(p0))
    slope = spread / std if std > 1e-12 else spread
    w1 = center - slope * float(np.mean(p0))
    teacher.readout = np.array([w1 + slope, w1])

    states = _random_states(np.random.default_rng([seed, 0]), count, n_qubits, f"synth{seed}-")
    clean = fw.predict_batch(np.stack([s.amplitudes for s in states]), teacher, arch)
    noise = np.random.default_rng([seed, 3]).normal(0.0, sigma, size=count)
    for s, y, e in zip(states, clean, noise):
        s.label_dg = float(y + e)
    return states
