"""Command-line surface: track, eval, gradcheck, synth.

Config files are YAML key/value documents mirroring TrackerConfig;
unknown keys are rejected outright so a typoed hyperparameter cannot
silently fall back to a default.  Every command is deterministic given
its flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import model_io
from .evaluation import (load_sequence, ope_curves, read_box_file,
                         synth_sequence, write_sequence)
from .geometry import state_from_box
from .imagery import PATCH_DIM
from .optim import finite_diff_grad, flatten_theta, unflatten_theta
from .rnn import (LABEL_BACKGROUND, LABEL_TARGET, LabeledSample, Theta,
                  gradient, objective)
from .tracker import Tracker, TrackerConfig
from .tree import generate_tree, grid_adjacency

GRADCHECK_TOLERANCE = 1e-5


def _config_sets(path, key: str) -> bool:
    if path is None:
        return False
    raw = yaml.safe_load(Path(path).read_text())
    return isinstance(raw, dict) and key in raw


def load_config(path, overrides=None) -> TrackerConfig:
    """Build a TrackerConfig from an optional YAML file plus overrides."""
    values = {}
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text())
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ValueError(f"config file {path} must hold a key/value mapping")
        allowed = {f.name for f in dataclasses.fields(TrackerConfig)}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        values.update(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    if "motion_std" in values:
        values["motion_std"] = tuple(float(v) for v in values["motion_std"])
    return TrackerConfig(**values)


def cmd_track(args) -> int:
    threads = args.threads
    if threads is None and not _config_sets(args.config, "threads"):
        threads = os.cpu_count() or 1
    config = load_config(args.config, {
        "seed": args.seed, "threads": threads, "tree_count": args.trees,
    })
    seq = load_sequence(args.seq)
    print(f"config: {json.dumps(dataclasses.asdict(config))}")

    tracker = Tracker(config)
    result = tracker.run(seq.frames, state_from_box(seq.boxes[0]))
    if not result.bootstrap_completed:
        print("sequence shorter than the bootstrap; ran coarse stage only")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{i} " + " ".join(f"{v:.6f}" for v in box)
             for i, box in enumerate(result.boxes, start=1)]
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} frames to {out}")

    if args.model:
        model_io.save_model(args.model, tracker.model())
        print(f"wrote model to {args.model}")
    if args.metrics:
        curves = ope_curves(result.boxes, seq.boxes)
        Path(args.metrics).write_text(curves.to_csv())
        print(f"precision-at-20 = {curves.precision_at_20:.3f}")
        print(f"success AUC = {curves.success_auc:.3f}")
    return 0


def cmd_eval(args) -> int:
    result = read_box_file(args.result, allow_frame_column=True)
    gt = read_box_file(args.gt, allow_frame_column=True)
    curves = ope_curves(result, gt)
    if args.metrics:
        Path(args.metrics).write_text(curves.to_csv())
    print(f"precision-at-20 = {curves.precision_at_20:.3f}")
    print(f"success AUC = {curves.success_auc:.3f}")
    return 0


def _random_samples(n_samples: int, rng) -> list:
    adjacency = grid_adjacency()
    out = []
    for i in range(n_samples):
        patches = rng.uniform(0.0, 1.0, (9, PATCH_DIM))
        label = LABEL_TARGET if i % 2 == 0 else LABEL_BACKGROUND
        tree = generate_tree(adjacency, int(rng.integers(2 ** 63)))
        out.append(LabeledSample(patches, label, tree))
    return out


def run_gradcheck(n: int = 10, n_samples: int = 5, seed: int = 0,
                  lam: float = 1e-4, step: float = 1e-5, corrupt: bool = False):
    """Compare analytic and central-difference gradients block by block.

    Returns (per-block max relative error, overall max).  The relative
    error of a component pair (a, d) is |a - d| / max(1, |a|, |d|).
    corrupt=True perturbs one block first (negative-control hook).
    """
    if n < 2:
        raise ValueError("gradcheck needs feature dimension >= 2")
    rng = np.random.default_rng(seed)
    samples = _random_samples(n_samples, rng)
    theta = Theta.zeros(n)
    for block in theta.blocks().values():
        block[...] = rng.normal(0.0, 0.1, block.shape)

    analytic = gradient(theta, samples, lam)
    if corrupt:
        analytic.w_merge = analytic.w_merge * 1.5 + 1e-3

    flat_fd = finite_diff_grad(
        lambda x: objective(unflatten_theta(x, n), samples, lam),
        flatten_theta(theta), step)
    fd = unflatten_theta(flat_fd, n)

    per_block = {}
    for name, a in analytic.blocks().items():
        d = getattr(fd, name)
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(d)))
        per_block[name] = float((np.abs(a - d) / denom).max())
    return per_block, max(per_block.values())


def cmd_gradcheck(args) -> int:
    per_block, worst = run_gradcheck(args.n, args.samples, args.seed,
                                     corrupt=args.corrupt)
    for name, err in per_block.items():
        print(f"{name}: max relative error {err:.3e}")
    print(f"overall max relative error {worst:.3e} "
          f"({'PASS' if worst < GRADCHECK_TOLERANCE else 'FAIL'} at {GRADCHECK_TOLERANCE:g})")
    return 0 if worst < GRADCHECK_TOLERANCE else 1


def cmd_synth(args) -> int:
    seq = synth_sequence(args.width, args.height, args.frames, args.target_size,
                         (args.start_x, args.start_y), (args.vx, args.vy),
                         texture_seed=args.seed, noise_seed=args.seed + 1,
                         noise_level=args.noise)
    write_sequence(seq, args.out)
    print(f"wrote {len(seq)} frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rnntrack",
                                     description="Tree-feature visual tracker")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="train on frame 1 and track a sequence")
    p.add_argument("--seq", required=True, help="sequence directory")
    p.add_argument("--out", required=True, help="result file (frame x y w h per line)")
    p.add_argument("--model", help="write the trained model archive here")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--metrics", help="also write OPE metrics CSV against the ground truth")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--trees", type=int, help="descriptor tree count")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a result file against ground truth")
    p.add_argument("--result", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--metrics", help="write the curves CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--target-size", type=int, default=40)
    p.add_argument("--start-x", type=int, default=21)
    p.add_argument("--start-y", type=int, default=41)
    p.add_argument("--vx", type=float, default=2.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
