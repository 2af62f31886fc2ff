"""``gpr-recon`` command line.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Every command writes ``<command>.manifest.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import CheckpointError, NumericalError, load_checkpoint
from .cloud import PlyError, chamfer_distance, l1_nn_distance, read_ply, register_cross_sections, write_ply
from .dataset import int_seed, rng_for, sparse_from_truth
from .gprnet import CD_SCALE, L1_SCALE, NOISE_LEVELS, GPRNet, GPRNetConfig, TrainConfig, evaluate, noise_sweep
from .gprnet import split_dataset, train_gprnet
from .gprnet.model import N_OUTPUT
from .kinematics import plan_grid_survey, write_survey
from .migration import MigrationNet, read_grid, write_grid
from .pipeline import densify, fraction_near_surface, line_grid, migrate_bpa, migrate_net, sparse_cloud
from .pipeline import survey_bscans
from .scene import (FormatError, demo_scene, ground_truth_cross_section, ground_truth_dense_cloud, random_scene,
                    read_bscan, read_scene, write_bscan, write_scene)

logger = logging.getLogger("gprrecon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --- config files ----------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    """``key value`` (or ``key = value``) per line; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        s = s.replace("=", " ", 1)
        parts = s.split(None, 1)
        if len(parts) != 2:
            raise UsageError(f"{path}:{lineno}: expected 'key value'")
        out[parts[0].replace("-", "_")] = parts[1].strip()
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    """Install config values as parser defaults; explicit flags still win."""
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in config.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} expects true/false, got {value!r}")
            defaults[key] = low in _TRUE
        elif action.nargs in ("*", "+"):
            defaults[key] = [action.type(v) if action.type else v for v in value.split()]
        else:
            defaults[key] = action.type(value) if action.type else value
    parser.set_defaults(**defaults)


# --- manifests ---------------------------------------------------------------------

class Run:
    """Collects timings and artifact paths for one command's manifest."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}

    def config(self) -> dict:
        skip = {"func", "out", "config", "verbose"}
        return {k: v for k, v in sorted(vars(self.args).items()) if k not in skip}

    def config_hash(self) -> str:
        blob = json.dumps(self.config(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(p))
        return p

    def write_manifest(self) -> Path:
        p = self.out / f"{self.command}.manifest.json"
        manifest = {
            "command": self.command, "tool_version": __version__, "seed": self.args.seed,
            "config_hash": self.config_hash(), "config": self.config(),
            "inputs": self.inputs, "outputs": self.outputs,
            "timings_s": self.timings, "created": datetime.now(timezone.utc).isoformat(),
        }
        p.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
        return p


# --- helpers ------------------------------------------------------------------------

def _load_scene(run: Run, path):
    if path is None:
        return demo_scene()
    run.inputs.append(str(path))
    return read_scene(path)


def _bscan_paths(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*.gprb")))
        else:
            out.append(p)
    if not out:
        raise UsageError("no B-scan files given")
    return out


def _sample_dirs(data: Path) -> list[Path]:
    if not data.is_dir():
        raise FileNotFoundError(f"dataset directory {data} does not exist")
    dirs = sorted(d for d in data.iterdir() if (d / "sparse.ply").exists() and (d / "dense.ply").exists())
    if not dirs:
        raise ValueError(f"dataset {data} is empty (no sample directories with sparse.ply and dense.ply)")
    return dirs


def _load_pairs(run: Run, data) -> list[tuple[np.ndarray, np.ndarray]]:
    pairs = []
    for d in _sample_dirs(Path(data)):
        run.inputs.append(str(d))
        pairs.append((read_ply(d / "sparse.ply"), read_ply(d / "dense.ply")))
    return pairs


def load_gprnet(path) -> GPRNet:
    """Rebuild a GPRNet from a checkpoint; hidden widths are read off the tensor shapes."""
    state = load_checkpoint(path)
    try:
        multiplier = state["enc.stack0.layer1.weight"].shape[1] / 64
    except KeyError:
        raise CheckpointError(f"{path}: not a GPRNet checkpoint") from None
    model = GPRNet(GPRNetConfig(width_multiplier=multiplier))
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return model


def load_migrationnet(path) -> MigrationNet:
    state = load_checkpoint(path)
    try:
        width = state["enc0.group0.conv1.weight"].shape[0]
    except KeyError:
        raise CheckpointError(f"{path}: not a MigrationNet checkpoint") from None
    model = MigrationNet(width)
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return model


def _survey(scene, args):
    trace = args.trace_spacing if args.trace_spacing else scene.extents[0 if args.direction == "x" else 1] / 255
    return plan_grid_survey(scene.extents, args.line_spacing, trace, args.direction, jitter=args.jitter,
                            seed=int_seed(args.seed, 0))


def _write_scene_bundle(run: Run, scene, args, prefix: str, seed: int) -> None:
    """B-scans, ground-truth sections, sparse and dense truth clouds for one scene."""
    plan = _survey(scene, args)
    write_scene(scene, run.path(f"{prefix}scene.txt"))
    write_survey(plan, run.path(f"{prefix}survey.txt"))
    with run.stage("synthesize"):
        bscans = survey_bscans(scene, plan, args.samples)
    for k, b in enumerate(bscans):
        write_bscan(b, run.path(f"{prefix}line_{k:02d}.gprb"))
    with run.stage("ground_truth"):
        sections = [ground_truth_cross_section(scene, line, line_grid(b)) for line, b in zip(plan.lines, bscans)]
        for k, cs in enumerate(sections):
            write_grid(cs, run.path(f"{prefix}truth_line_{k:02d}.gprc"))
        if scene.pipes:
            write_ply(ground_truth_dense_cloud(scene, N_OUTPUT, seed=int_seed(seed, 2)), run.path(f"{prefix}dense.ply"))
            if any(cs.mask.any() for cs in sections):
                write_ply(sparse_from_truth(scene, plan, line_grid(bscans[0]), seed=int_seed(seed, 1)),
                          run.path(f"{prefix}sparse.ply"))


# --- commands -----------------------------------------------------------------------

def cmd_simulate(args, run: Run) -> None:
    if args.count is None:
        _write_scene_bundle(run, _load_scene(run, args.scene), args, "", args.seed)
        return
    if args.count < 1:
        raise UsageError("--count must be positive")
    made, i = 0, 0
    while made < args.count:
        scene = random_scene(rng_for(args.seed, 0, i))
        i += 1
        if not scene.pipes:
            continue
        _write_scene_bundle(run, scene, args, f"scene_{made:04d}/", int_seed(args.seed, 1, i))
        made += 1
    logger.info("wrote %d scenes to %s", made, run.out)


def _migrate_one(b, args, eps_r, net):
    if net is not None:
        return migrate_net(b, net, line_grid(b, args.height, args.width), args.threshold)
    return migrate_bpa(b, eps_r, line_grid(b, args.height, args.width), args.mode, args.threshold)


def _medium(run: Run, args):
    if args.eps_r is not None:
        return args.eps_r
    if args.truth is not None:
        return _load_scene(run, args.truth).eps_r
    raise UsageError("the medium permittivity is needed: pass --eps-r or --truth")


def cmd_migrate(args, run: Run) -> None:
    net = load_migrationnet(args.migration_checkpoint) if args.migration_checkpoint else None
    eps_r = None if net is not None else _medium(run, args)
    for p in _bscan_paths(args.bscans):
        run.inputs.append(str(p))
        with run.stage("migrate"):
            cs = _migrate_one(read_bscan(p), args, eps_r, net)
        write_grid(cs, run.path(p.with_suffix(".gprc").name))


def cmd_reconstruct(args, run: Run) -> None:
    if not args.oracle_bpa and not args.migration_checkpoint:
        raise UsageError("no migration model: pass --migration-checkpoint or --oracle-bpa")
    net = load_migrationnet(args.migration_checkpoint) if args.migration_checkpoint else None
    eps_r = None if net is not None else _medium(run, args)
    completion = load_gprnet(args.checkpoint) if args.checkpoint else None
    if args.checkpoint:
        run.inputs.append(str(args.checkpoint))
    sections = []
    for p in _bscan_paths(args.bscans):
        run.inputs.append(str(p))
        with run.stage("migrate"):
            sections.append(_migrate_one(read_bscan(p), args, eps_r, net))
    with run.stage("register"):
        sparse = sparse_cloud(sections, seed=int_seed(args.seed, 1))
    with run.stage("complete"):
        dense = densify(sparse, completion, seed=int_seed(args.seed, 2))
    write_ply(sparse, run.path("sparse.ply"))
    write_ply(dense, run.path("dense.ply"))
    if args.truth is not None:
        scene = read_scene(args.truth)
        truth = ground_truth_dense_cloud(scene, N_OUTPUT, seed=int_seed(args.seed, 3))
        metrics = {
            "cd_x1e3": chamfer_distance(dense, truth, return_grad=False) * CD_SCALE,
            "l1_x100": l1_nn_distance(dense, truth) * L1_SCALE,
            "sparse_near_surface": fraction_near_surface(scene, sparse, sections[0].cell),
            "n_sparse": len(sparse), "n_dense": len(dense),
        }
        run.path("metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")


def cmd_train(args, run: Run) -> None:
    pairs = _load_pairs(run, args.data)
    train_idx, val_idx, test_idx = split_dataset(len(pairs), args.n_val, args.n_test, seed=args.seed)
    if len(train_idx) == 0:
        raise ValueError(f"no training samples left after {args.n_val} validation + {args.n_test} test")
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr, lr_decay=args.lr_decay,
                      lr_decay_steps=args.lr_decay_steps, seed=args.seed, n_val=args.n_val, n_test=args.n_test,
                      max_steps=args.max_steps, checkpoint_path=str(run.path("model.gprn")),
                      log_path=str(run.path("train_log.csv")))
    model = GPRNet(GPRNetConfig(width_multiplier=args.width_multiplier), seed=int_seed(args.seed, 4))
    with run.stage("train"):
        train_gprnet([pairs[i] for i in train_idx], cfg, [pairs[i] for i in val_idx], model=model)
    split = {"train": sorted(map(int, train_idx)), "val": sorted(map(int, val_idx)), "test": sorted(map(int, test_idx))}
    run.path("split.json").write_text(json.dumps(split) + "\n")


def _eval_model(args, run: Run):
    if args.oracle_truth:
        return None
    if not args.checkpoint:
        raise UsageError("pass --checkpoint (or --oracle-truth for the perfect-stub baseline)")
    run.inputs.append(str(args.checkpoint))
    return load_gprnet(args.checkpoint)


class _TruthOracle:
    """Perfect-stub model: the k-th call returns the k-th ground truth (cycling),
    whatever the (possibly noisy) input."""

    def __init__(self, pairs):
        self.dense = [d for _, d in pairs]
        self.calls = 0

    def predict_one(self, sparse):
        out = self.dense[self.calls % len(self.dense)]
        self.calls += 1
        return out


def _oracle(pairs):
    return _TruthOracle(pairs)


def cmd_eval(args, run: Run) -> None:
    pairs = _load_pairs(run, args.data)
    model = _eval_model(args, run)
    with run.stage("evaluate"):
        report = evaluate(_oracle(pairs) if model is None else model, pairs)
    with open(run.path("eval.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "cd_x1e3", "l1_x100"])
        for i, (c, l1) in enumerate(zip(report.cd_x1e3, report.l1_x100)):
            w.writerow([i, repr(c), repr(l1)])
    summary = {"cd_x1e3": report.mean_cd_x1e3, "l1_x100": report.mean_l1_x100, "n": len(pairs)}
    run.path("eval.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))


def cmd_noise_sweep(args, run: Run) -> None:
    pairs = _load_pairs(run, args.data)
    model = _eval_model(args, run)
    if any(not lv >= 0 for lv in args.levels):
        raise UsageError("noise levels must be non-negative")
    with run.stage("sweep"):
        rows = noise_sweep(_oracle(pairs) if model is None else model, pairs, args.levels, seed=args.seed)
    with open(run.path("noise_sweep.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["noise_std", "cd_x1e3", "l1_x100", "n"])
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_export(args, run: Run) -> None:
    """GPRC sections -> one registered PLY; PLY clouds -> CSV."""
    paths = [Path(p) for p in args.inputs]
    grids = [p for p in paths if p.suffix == ".gprc"]
    plys = [p for p in paths if p.suffix == ".ply"]
    if len(grids) + len(plys) != len(paths):
        raise UsageError("export takes .gprc and .ply files")
    run.inputs.extend(map(str, paths))
    if grids:
        sections = [read_grid(p) for p in grids]
        masks = [s for s in sections if hasattr(s, "mask")]
        if len(masks) != len(sections):
            raise ValueError("export needs binary cross-section grids, got an energy image")
        write_ply(register_cross_sections(masks), run.path(args.name + ".ply"))
    for p in plys:
        cloud = read_ply(p)
        with open(run.path(p.with_suffix(".csv").name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z"])
            w.writerows([[repr(v) for v in row] for row in cloud.tolist()])


# --- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key-value file supplying option defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out")
    common.add_argument("-v", "--verbose", action="store_true")

    migration_opts = argparse.ArgumentParser(add_help=False)
    migration_opts.add_argument("--eps-r", type=float, help="relative permittivity of the medium")
    migration_opts.add_argument("--truth", help="scene file with the ground truth (also supplies eps_r)")
    migration_opts.add_argument("--migration-checkpoint", help="MigrationNet checkpoint instead of back-projection")
    migration_opts.add_argument("--mode", choices=("abs", "coherent"), default="coherent")
    migration_opts.add_argument("--threshold", type=float, default=0.5)
    migration_opts.add_argument("--height", type=int, default=128)
    migration_opts.add_argument("--width", type=int, default=128)

    eval_opts = argparse.ArgumentParser(add_help=False)
    eval_opts.add_argument("--data", required=True, help="dataset directory written by 'simulate --count'")
    eval_opts.add_argument("--checkpoint", help="GPRNet checkpoint")
    eval_opts.add_argument("--oracle-truth", action="store_true", help="score the ground truth itself")

    parser = argparse.ArgumentParser(prog="gpr-recon", description="GPR survey simulation and 3D reconstruction")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="synthesize B-scans and ground truth")
    p.add_argument("--scene", help="scene file (default: built-in demo scene)")
    p.add_argument("--count", type=int, help="dataset mode: number of random scenes")
    p.add_argument("--line-spacing", type=float, default=0.2)
    p.add_argument("--trace-spacing", type=float, help="default: slab length / 255")
    p.add_argument("--direction", choices=("x", "y"), default="x")
    p.add_argument("--jitter", type=float, default=0.0, help="pose position noise std (m)")
    p.add_argument("--samples", type=int, default=256, help="time samples per trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("migrate", parents=[common, migration_opts], help="B-scans to cross-section grids")
    p.add_argument("bscans", nargs="+", help=".gprb files or directories")
    p.set_defaults(func=cmd_migrate)

    p = sub.add_parser("reconstruct", parents=[common, migration_opts], help="B-scans to sparse and dense clouds")
    p.add_argument("bscans", nargs="+", help=".gprb files or directories")
    p.add_argument("--oracle-bpa", action="store_true", help="migrate with back-projection")
    p.add_argument("--checkpoint", help="GPRNet checkpoint for completion (default: resample)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train", parents=[common], help="train GPRNet on a simulated dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--lr-decay", type=float, default=0.7)
    p.add_argument("--lr-decay-steps", type=int, default=50_000)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--n-val", type=int, default=100)
    p.add_argument("--n-test", type=int, default=150)
    p.add_argument("--width-multiplier", type=float, default=0.25)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, eval_opts], help="CD x1e3 and L1 x100 on a dataset")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise-sweep", parents=[common, eval_opts], help="evaluate under input noise")
    p.add_argument("--levels", type=float, nargs="+", default=list(NOISE_LEVELS), help="noise standard deviations")
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("export", parents=[common], help="GPRC grids to PLY, PLY to CSV")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--name", default="registered")
    p.set_defaults(func=cmd_export)
    return parser


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        args, _ = parser.parse_known_args(argv)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        apply_config(subparser, read_config(known.config))
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, bad usage exits 2
        return int(exc.code or 0)
    except (UsageError, OSError) as exc:
        print(f"gpr-recon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    run = Run(args.command, args)
    try:
        args.func(args, run)
    except UsageError as exc:
        print(f"gpr-recon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"gpr-recon: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, PlyError, CheckpointError, ValueError, OSError) as exc:
        print(f"gpr-recon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    run.write_manifest()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
