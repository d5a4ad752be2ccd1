"""Command-line entry point: ``qcnnbind <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical-check failure.

Environment: ``QCNNBIND_WORKERS`` sets the number of threads used for
per-sample ingestion work (default 1).
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import hashlib
import logging
import platform
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as M
from . import storage
from .circuit import resolve_arch, validate_arch
from .errors import (
    ConfigurationError,
    DegenerateComplexError,
    DegenerateSampleError,
    EncodingLengthError,
    FormatError,
    MemoryGateError,
    ParseError,
    QCNNError,
    RankDeficiencyError,
    ShapeError,
)
from .ingest import encode_files, read_manifest, synth_dataset
from .noise import NoiseConfig, Strategy, noisy_predict_batch
from .trainer import TrainConfig, predict, stack, sweep, train
from .verify import run_checks

log = logging.getLogger("qcnnbind")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3

CONFIG_KEYS = {
    "model": ["arch"],
    "data": ["train", "test"],
    "train": [f.name for f in fields(TrainConfig)] + ["lrs", "seeds"],
    "noise": ["strategy", "depol_p", "phase_gamma"],
    "output": ["dir"],
}

CONFIG_HELP = """\
run config file (INI):

  [model]   arch = fig1a | path/to/file.arch
  [data]    train = dataset.qds | manifest.txt ; test = ...
  [train]   lr, momentum, batch_size, steps, epochs, seed, init_low,
            init_high, eval_interval, grad_mode (analytic|fd),
            lrs (comma list, sweep), seeds (comma list, sweep)
  [noise]   strategy (none|final_qubit|layer_wise), depol_p, phase_gamma
  [output]  dir

Any key can be overridden with --set section.key=value.

environment:
  QCNNBIND_WORKERS  threads for per-sample ingestion work (default 1)
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- configuration ---------------------------------------------------------

def load_config(path=None, overrides=()) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(interpolation=None)
    for section in CONFIG_KEYS:
        cfg.add_section(section)
    cfg.set("model", "arch", "fig1a")
    cfg.set("noise", "strategy", "final_qubit")
    cfg.set("noise", "depol_p", "0.05")
    cfg.set("noise", "phase_gamma", "0.03")
    cfg.set("output", "dir", "run")
    if path is not None:
        if not Path(path).is_file():
            raise ConfigurationError(f"config file {path} not found")
        cfg.read(path, encoding="utf-8")
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigurationError(f"override {item!r} must look like section.key=value")
        if section not in cfg:
            cfg.add_section(section)
        cfg.set(section, name, value.strip())
    for section in cfg.sections():
        unknown = set(cfg[section]) - set(CONFIG_KEYS.get(section, []))
        if unknown:
            raise ConfigurationError(f"unknown config keys in [{section}]: {', '.join(sorted(unknown))}")
    return cfg


def _floats(text):
    return [float(t) for t in str(text).replace(" ", "").split(",") if t]


def _ints(text):
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def train_config(cfg) -> TrainConfig:
    kwargs = {}
    types = {f.name: f.type for f in fields(TrainConfig)}
    for key, value in cfg["train"].items():
        if key in ("lrs", "seeds"):
            continue
        t = types[key]
        try:
            if "int" in str(t):
                kwargs[key] = None if value.lower() == "none" else int(value)
            elif "float" in str(t):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError:
            raise ConfigurationError(f"bad value for train.{key}: {value!r}") from None
    return TrainConfig(**kwargs)


def noise_config(cfg) -> NoiseConfig:
    try:
        return NoiseConfig(float(cfg["noise"]["depol_p"]), float(cfg["noise"]["phase_gamma"]),
                           Strategy(cfg["noise"]["strategy"]))
    except ValueError as exc:
        raise ConfigurationError(f"bad noise configuration: {exc}") from None


def _arch(name):
    try:
        return resolve_arch(name)
    except OSError as exc:
        raise ConfigurationError(f"cannot read architecture {name!r}: {exc}") from None


def load_states(path, n_qubits=None):
    """Dataset file or complex manifest -> (n_qubits, states)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file {path} not found")
    if storage.is_dataset(path):
        nq, states = storage.read_dataset(path)
        return nq, states
    nq = n_qubits or 9
    states, _ = encode_files(read_manifest(path), nq)
    return nq, states


def _check_qubits(arch, n_qubits, path):
    if n_qubits != arch.n_qubits:
        raise ShapeError(
            f"{path}: samples use {n_qubits} qubits (length {1 << n_qubits}) "
            f"but {arch.name} needs {arch.n_qubits} (length {1 << arch.n_qubits})"
        )


def write_manifest(path, command, resolved: dict, wall_time=None):
    lines = [
        f"command: {command}",
        f"qcnnbind: {__version__}",
        f"python: {platform.python_version()}  numpy: {np.__version__}",
        f"timestamp: {_dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()}",
    ]
    if wall_time is not None:
        lines.append(f"wall_time_s: {wall_time:.3f}")
    for key in sorted(resolved):
        lines.append(f"{key} = {resolved[key]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _flatten(cfg, args=None):
    out = {f"{s}.{k}": v for s in cfg.sections() for k, v in cfg[s].items()}
    if args is not None:
        out["run.config"] = args.config or "(defaults)"
        out["run.overrides"] = "; ".join(args.set or []) or "(none)"
    return out


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- subcommands -----------------------------------------------------------

def cmd_voxelize(args):
    paths = read_manifest(args.manifest)
    states, skipped = encode_files(paths, args.qubits, workers=args.workers)
    out = Path(args.out)
    skip_log = out.with_name(out.name + ".skipped.txt")
    skip_log.write_text("".join(f"{p}\t{reason}\n" for p, reason in skipped), encoding="utf-8")
    if not states:
        print("no samples" if not paths else f"no samples: all {len(paths)} inputs failed", file=sys.stderr)
        return EXIT_DATA
    storage.write_dataset(out, states, args.qubits)
    write_manifest(out.with_name(out.name + ".manifest.txt"), "voxelize",
                   {"manifest": args.manifest, "qubits": args.qubits, "out": str(out),
                    "encoded": len(states), "skipped": len(skipped)})
    print(f"wrote {len(states)} samples ({1 << args.qubits} amplitudes each) to {out}; skipped {len(skipped)}")
    return EXIT_OK


def cmd_synth(args):
    arch = _arch(args.arch) if args.arch else None
    if bool(args.test_count) != bool(args.test_out):
        raise ConfigurationError("--test-count and --test-out go together")
    extra = args.test_count or 0
    states = synth_dataset(args.seed, args.count + extra, args.qubits, arch=arch, sigma=args.sigma)
    out = Path(args.out)
    storage.write_dataset(out, states[:args.count], args.qubits)
    print(f"wrote {args.count} synthetic samples to {out}")
    if extra:
        storage.write_dataset(args.test_out, states[args.count:], args.qubits)
        print(f"wrote {extra} held-out samples (same teacher) to {args.test_out}")
    write_manifest(out.with_name(out.name + ".manifest.txt"), "synth",
                   {"seed": args.seed, "count": args.count, "qubits": args.qubits,
                    "arch": args.arch or "default", "sigma": args.sigma, "out": str(out),
                    "test_count": extra, "test_out": args.test_out})
    return EXIT_OK


def _apply_flags(cfg, args):
    pairs = {
        "arch": ("model", "arch"), "train_data": ("data", "train"), "test_data": ("data", "test"),
        "out": ("output", "dir"), "lr": ("train", "lr"), "steps": ("train", "steps"),
        "seed": ("train", "seed"), "lrs": ("train", "lrs"), "seeds": ("train", "seeds"),
    }
    for attr, (section, key) in pairs.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg.set(section, key, str(value))


def _training_inputs(cfg):
    arch = _arch(cfg["model"]["arch"])
    if not cfg["data"].get("train"):
        raise ConfigurationError("no training data: set data.train or --train-data")
    nq, train_set = load_states(cfg["data"]["train"], arch.n_qubits)
    _check_qubits(arch, nq, cfg["data"]["train"])
    test_set = []
    if cfg["data"].get("test"):
        nq_t, test_set = load_states(cfg["data"]["test"], arch.n_qubits)
        _check_qubits(arch, nq_t, cfg["data"]["test"])
    return arch, train_set, test_set


def _emit_run(run, arch, out: Path):
    storage.write_checkpoint(out / "checkpoint.qckpt", arch, run.params)
    M.emit_reports(run, out)
    ids, true, pred = run.train_predictions
    M.write_predictions(out / "predictions_train.csv", ids, true, pred)


def cmd_train(args):
    cfg = load_config(args.config, args.set or [])
    _apply_flags(cfg, args)
    if cfg["train"].get("lrs"):
        return cmd_sweep(args, cfg)
    tcfg = train_config(cfg)
    arch, train_set, test_set = _training_inputs(cfg)
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    run = train(train_set, test_set, arch, tcfg)
    _emit_run(run, arch, out)
    resolved = _flatten(cfg, args) | {f"train.{k}": v for k, v in asdict(tcfg).items()}
    resolved["checkpoint.sha256"] = _sha256(out / "checkpoint.qckpt")
    write_manifest(out / "manifest.txt", "train", resolved, run.wall_time)
    print(run.summary(), end="")
    return EXIT_OK


def cmd_sweep(args, cfg=None):
    if cfg is None:
        cfg = load_config(args.config, args.set or [])
        _apply_flags(cfg, args)
    lrs = _floats(cfg["train"].get("lrs", "")) or [float(cfg["train"].get("lr", 1e-3))]
    seeds = _ints(cfg["train"].get("seeds", "")) or [int(cfg["train"].get("seed", 0))]
    tcfg = train_config(cfg)
    arch, train_set, test_set = _training_inputs(cfg)
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = sweep(train_set, test_set, arch, lrs, seeds, tcfg)
    for run in result.runs:
        if run.params is None:
            continue
        sub = out / f"lr{run.config['lr']:g}_seed{run.config['seed']}"
        sub.mkdir(exist_ok=True)
        _emit_run(run, arch, sub)
    (out / "summary.txt").write_text(result.summary(), encoding="utf-8")
    resolved = _flatten(cfg, args) | {"sweep.lrs": lrs, "sweep.seeds": seeds}
    write_manifest(out / "manifest.txt", "sweep", resolved, time.perf_counter() - t0)
    print(result.summary(), end="")
    return EXIT_OK


def _load_eval_inputs(args):
    arch, params, _ = storage.read_checkpoint(args.checkpoint)
    nq, states = load_states(args.data, arch.n_qubits)
    _check_qubits(arch, nq, args.data)
    if not states:
        raise ShapeError(f"{args.data}: no samples")
    return arch, params, states


def cmd_eval(args):
    arch, params, states = _load_eval_inputs(args)
    X, y, ids = stack(states)
    pred = predict(params, X, arch)
    m = M.evaluate(pred, y)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    M.write_predictions(out / "predictions.csv", ids, y, pred)
    text = f"arch: {arch.name}\nsamples: {len(y)}\nrmsd: {M.fmt(m.rmsd)}\npcc: {M.fmt(m.pcc)}\n"
    (out / "metrics.txt").write_text(text, encoding="utf-8")
    write_manifest(out / "manifest.txt", "eval", {"checkpoint": args.checkpoint, "data": args.data})
    print(text, end="")
    return EXIT_OK


def cmd_predict(args):
    arch, params, states = _load_eval_inputs(args)
    X, y, ids = stack(states)
    pred = predict(params, X, arch)
    M.write_predictions(args.out, ids, y, pred)
    print(f"wrote {len(ids)} predictions to {args.out}")
    return EXIT_OK


def cmd_noise_eval(args):
    cfg = load_config(args.config, args.set or [])
    for attr, key in (("strategy", "strategy"), ("depol_p", "depol_p"), ("phase_gamma", "phase_gamma")):
        value = getattr(args, attr)
        if value is not None:
            cfg.set("noise", key, str(value))
    ncfg = noise_config(cfg)
    arch, params, states = _load_eval_inputs(args)
    X, y, ids = stack(states)
    clean = predict(params, X, arch)
    try:
        noisy = noisy_predict_batch(X, params, arch, ncfg, allow_large=args.allow_large_dm)
    except MemoryGateError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mc, mn = M.evaluate(clean, y), M.evaluate(noisy, y)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    M.write_predictions(out / "predictions_noisy.csv", ids, y, noisy)
    M.write_predictions(out / "predictions.csv", ids, y, clean)
    text = (
        f"arch: {arch.name}\nsamples: {len(y)}\n"
        f"noise: strategy={ncfg.strategy.value} depol_p={ncfg.depol_p} phase_gamma={ncfg.phase_gamma}\n"
        f"{'':<12}{'RMSD':>26}{'PCC':>26}\n"
        f"{'noise-free':<12}{M.fmt(mc.rmsd):>26}{M.fmt(mc.pcc):>26}\n"
        f"{'noisy':<12}{M.fmt(mn.rmsd):>26}{M.fmt(mn.pcc):>26}\n"
        f"max |noisy - noise-free| prediction: {M.fmt(float(np.max(np.abs(noisy - clean))))}\n"
    )
    (out / "noise_metrics.txt").write_text(text, encoding="utf-8")
    write_manifest(out / "manifest.txt", "noise-eval",
                   {"checkpoint": args.checkpoint, "data": args.data,
                    "noise.strategy": ncfg.strategy.value, "noise.depol_p": ncfg.depol_p,
                    "noise.phase_gamma": ncfg.phase_gamma, "allow_large_dm": args.allow_large_dm})
    print(text, end="")
    return EXIT_OK


def cmd_verify(args):
    checkpoint = storage.read_checkpoint(args.checkpoint) if args.checkpoint else None
    checks = run_checks(draws=args.draws, include_large=not args.skip_large, seed=args.seed,
                        checkpoint=checkpoint)
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if not c.ok]
    worst = max(c.deviation for c in checks if c.name.startswith("statevector"))
    print(f"max statevector/density deviation: {worst:.3e}")
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    print("all checks passed")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcnnbind", description=__doc__.split("\n")[0],
                epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("voxelize", help="encode complex files listed in a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--qubits", type=int, choices=(9, 12), default=9)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_voxelize)

    s = sub.add_parser("synth", help="generate a teacher-labelled synthetic dataset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=512)
    s.add_argument("--qubits", type=int, choices=(9, 12), default=9)
    s.add_argument("--arch", default=None)
    s.add_argument("--sigma", type=float, default=0.5, help="label noise std (kcal/mol)")
    s.add_argument("--out", required=True)
    s.add_argument("--test-count", type=int, default=0,
                   help="extra held-out samples labelled by the same teacher")
    s.add_argument("--test-out", default=None)
    s.set_defaults(func=cmd_synth)

    for name, func, hlp in (("train", cmd_train, "train one model (or sweep with --lrs)"),
                            ("sweep", cmd_sweep, "train over learning rates and seeds")):
        s = sub.add_parser(name, help=hlp, epilog=CONFIG_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        s.add_argument("--config", default=None)
        s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
        s.add_argument("--arch")
        s.add_argument("--train-data")
        s.add_argument("--test-data")
        s.add_argument("--out")
        s.add_argument("--lr", type=float)
        s.add_argument("--steps", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--lrs", help="comma-separated learning rates, e.g. 1e-2,1e-3,1e-4,1e-5")
        s.add_argument("--seeds", help="comma-separated seeds")
        s.set_defaults(func=func)

    for name, func, hlp in (("eval", cmd_eval, "noise-free metrics for a checkpoint"),
                            ("predict", cmd_predict, "write predictions for a dataset")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--data", required=True)
        s.add_argument("--out", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("noise-eval", help="metrics under depolarizing + phase-damping noise")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    s.add_argument("--strategy", choices=[x.value for x in Strategy])
    s.add_argument("--depol-p", dest="depol_p", type=float)
    s.add_argument("--phase-gamma", dest="phase_gamma", type=float)
    s.add_argument("--allow-large-dm", action="store_true",
                   help="permit density matrices above 9 qubits (~128 MB each at 12)")
    s.set_defaults(func=cmd_noise_eval)

    s = sub.add_parser("verify", help="cross-engine consistency checks")
    s.add_argument("--checkpoint", default=None)
    s.add_argument("--draws", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--skip-large", action="store_true", help="skip 12-qubit density checks")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParseError, MemoryGateError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShapeError, EncodingLengthError, FormatError, DegenerateComplexError,
            DegenerateSampleError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RankDeficiencyError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except QCNNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
