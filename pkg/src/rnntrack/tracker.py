"""End-to-end tracking driver.

Frame 1 trains the network on positive/negative windows harvested around
the annotation, then the tracker alternates candidate generation and
appearance scoring.  A cheap raw-pixel sparse model screens all
candidates; once ten frames of learned features have been collected the
two feature dictionaries come online and re-rank the screened shortlist.
Both dictionary pairs refresh every few frames from the predicted
target.  All randomness flows from one config seed, so runs repeat
bit-for-bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sparse
from .evaluation import iou
from .geometry import AffineState, box_from_state, state_from_box
from .imagery import (GrayImage, decompose_patches, decompose_patches_batch,
                      warp_region, warp_regions)
from .optim import OptimOptions, OptimReport, flatten_theta, lbfgs_minimize, unflatten_theta
from .rnn import (LABEL_BACKGROUND, LABEL_TARGET, LabeledSample, Theta,
                  _forward_batch, init_theta, leaf_descriptors, objective,
                  gradient, region_descriptor)
from .tree import generate_tree, grid_adjacency

DEFAULT_MOTION_STD = (10.0, 10.0, 0.01, 0.0, 0.005, 0.0)


@dataclass
class MotionModel:
    """Per-component Gaussian spread of the candidate proposal."""

    std_devs: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_MOTION_STD))

    def __post_init__(self):
        self.std_devs = np.asarray(self.std_devs, dtype=np.float64)
        if self.std_devs.shape != (6,) or np.any(self.std_devs < 0):
            raise ValueError("motion model needs 6 non-negative standard deviations")


@dataclass
class TrackerConfig:
    n: int = 50
    lam: float = 1e-4
    candidates: int = 600
    fine_count: int = 20
    positives: int = 20
    negatives: int = 100
    bootstrap_frames: int = 10
    update_interval: int = 5
    tree_count: int = 10
    motion_std: tuple = DEFAULT_MOTION_STD
    lambda_sc: float = 0.01
    alpha: float = 30.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.fine_count > self.candidates:
            raise ValueError("fine_count cannot exceed the candidate count")
        if self.bootstrap_frames < 1 or self.update_interval < 1:
            raise ValueError("bootstrap_frames and update_interval must be positive")
        if self.tree_count < 1 or self.candidates < 1:
            raise ValueError("tree_count and candidates must be positive")
        if min(self.positives, self.negatives) < 1 or self.n < 1:
            raise ValueError("sample counts and feature dimension must be positive")
        if self.threads < 1:
            raise ValueError("threads must be positive")


@dataclass
class TrackResult:
    states: list  # AffineState per frame
    boxes: np.ndarray  # (N, 4) x,y,w,h, 1-indexed
    fine_likelihoods: list  # per frame: likelihoods of the last-stage ranking
    update_frames: list  # 1-based frames where dictionaries were refreshed
    bootstrap_completed: bool


class TrainingError(RuntimeError):
    """First-frame optimization could not make progress."""

    def __init__(self, message: str, report: OptimReport):
        super().__init__(message)
        self.report = report


def harvest_training_samples(frame: GrayImage, gt: AffineState,
                             config: TrackerConfig, seed) -> list:
    """Positive and negative training windows around the annotation.

    Positives jitter the target by at most 3 px and 5% scale (and must
    keep overlap above 0.5); negatives sit 0.3-1.5 target-widths away
    with overlap under 0.3.  Each sample is assigned its own random
    merge tree, fixed for the whole optimization.
    """
    rng = np.random.default_rng(seed)
    adjacency = grid_adjacency()
    gt_box = box_from_state(gt)
    width = gt_box[2]
    samples = []

    def add(state, label):
        patches = decompose_patches(warp_region(frame, state))
        tree = generate_tree(adjacency, int(rng.integers(2 ** 63)))
        samples.append(LabeledSample(patches, label, tree))

    made, attempts = 0, 0
    while made < config.positives:
        attempts += 1
        if attempts > 10000:
            raise ValueError("could not place positive samples")
        dx, dy = rng.uniform(-3.0, 3.0, 2)
        if np.hypot(dx, dy) > 3.0:
            continue
        factor = rng.uniform(0.95, 1.05)
        state = AffineState(gt.tx + dx, gt.ty + dy, gt.scale * factor,
                            gt.rotation, gt.aspect, gt.skew)
        if iou(box_from_state(state), gt_box) <= 0.5:
            continue
        add(state, LABEL_TARGET)
        made += 1

    made, attempts = 0, 0
    while made < config.negatives:
        attempts += 1
        if attempts > 100000:
            raise ValueError("frame too small to place negative samples")
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius = rng.uniform(0.3, 1.5) * width
        dx, dy = radius * np.cos(angle), radius * np.sin(angle)
        state = AffineState(gt.tx + dx, gt.ty + dy, gt.scale,
                            gt.rotation, gt.aspect, gt.skew)
        if not (0 <= state.tx <= frame.width - 1 and 0 <= state.ty <= frame.height - 1):
            continue
        if iou(box_from_state(state), gt_box) >= 0.3:
            continue
        add(state, LABEL_BACKGROUND)
        made += 1
    return samples


def train_first_frame(samples, config: TrackerConfig, init_seed=None):
    """Fit the network to the harvested samples; returns (Theta, report)."""
    seed = config.seed if init_seed is None else init_seed
    theta0 = init_theta(config.n, seed)
    x0 = flatten_theta(theta0)

    def f(x):
        return objective(unflatten_theta(x, config.n), samples, config.lam)

    def g(x):
        return flatten_theta(gradient(unflatten_theta(x, config.n), samples, config.lam))

    x_best, report = lbfgs_minimize(f, g, x0, OptimOptions())
    if report.iterations == 0 and report.status == "line search failed":
        raise TrainingError("first-frame training failed at iteration 0", report)
    return unflatten_theta(x_best, config.n), report


def sample_candidates(prev: AffineState, motion: MotionModel, count: int, seed) -> list:
    """Gaussian perturbations of the previous state; scale/aspect floored."""
    if count < 1:
        raise ValueError("need at least one candidate")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, (count, 6)) * motion.std_devs
    base = prev.as_array()
    out = []
    for row in noise:
        vals = base + row
        vals[2] = max(vals[2], 1e-3)
        vals[4] = max(vals[4], 1e-3)
        out.append(AffineState.from_array(vals))
    return out


def _raw_features(frame: GrayImage, states):
    """Raw-pixel features: (K, 1024) regions and (K, 9, 256) patches."""
    regions = warp_regions(frame, states)
    k = regions.shape[0]
    return regions.reshape(k, -1), decompose_patches_batch(regions)


def _chunks(n_items: int, n_chunks: int):
    bounds = np.linspace(0, n_items, min(n_chunks, n_items) + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def coarse_log_scores(frame: GrayImage, candidates, raw_dicts,
                      config: TrackerConfig) -> np.ndarray:
    """Raw-pixel sparse-coding log-likelihood of every candidate."""
    holistic_dict, local_dict = raw_dicts

    def score_span(span):
        a, b = span
        holistic, patches = _raw_features(frame, candidates[a:b])
        return sparse.score_candidates(holistic_dict, local_dict, holistic, patches,
                                       config.lambda_sc, config.alpha)

    spans = _chunks(len(candidates), config.threads)
    if config.threads == 1 or len(spans) == 1:
        parts = [score_span(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(score_span, spans))
    return np.concatenate(parts)


def coarse_rank(frame: GrayImage, candidates, raw_dicts, config: TrackerConfig):
    """Screen candidates with the raw-pixel model.

    Returns (shortlist, their log scores), best first; ties keep the
    lower candidate index.
    """
    scores = coarse_log_scores(frame, candidates, raw_dicts, config)
    order = np.lexsort((np.arange(len(candidates)), -scores))
    top = order[:config.fine_count]
    return [candidates[i] for i in top], scores[top]


def _feature_descriptors(theta: Theta, patch_stack: np.ndarray, trees):
    """Tree-pooled root descriptors and leaf features for a candidate batch.

    patch_stack: (K, 9, 256).  Returns (K, n) descriptors, (K, 9, n) leaves.
    """
    k = patch_stack.shape[0]
    n_trees = len(trees)
    rep = np.repeat(patch_stack, n_trees, axis=0)
    acts = _forward_batch(theta, rep, trees * k)
    root_ids = np.array([t.root - 1 for t in trees] * k)
    roots = acts[np.arange(k * n_trees), root_ids].reshape(k, n_trees, theta.n)
    leaves = acts[::n_trees, :9, :].copy()
    return roots.mean(axis=1), leaves


def fine_rank(frame: GrayImage, candidates, theta: Theta, trees,
              feature_dicts, config: TrackerConfig):
    """Re-rank the shortlist with learned features.

    Returns (best state, per-candidate likelihoods); the argmax breaks
    ties toward the lowest candidate index.
    """
    holistic_dict, local_dict = feature_dicts
    _, patch_stack = _raw_features(frame, candidates)
    descriptors, leaves = _feature_descriptors(theta, patch_stack, trees)
    log_scores = sparse.score_candidates(holistic_dict, local_dict, descriptors,
                                         leaves, config.lambda_sc, config.alpha)
    best = int(np.argmax(log_scores))
    return candidates[best], np.exp(log_scores)


@dataclass
class TrackerModel:
    """Everything learned or fixed at startup, for persistence."""

    theta: Theta
    trees: list
    feature_dicts: tuple | None  # (holistic, local) or None before bootstrap ends
    raw_dicts: tuple
    config: TrackerConfig


class Tracker:
    """Stateful per-sequence driver used by track_sequence and the CLI."""

    def __init__(self, config: TrackerConfig):
        self.config = config
        self.adjacency = grid_adjacency()
        ss = np.random.SeedSequence(config.seed)
        self._harvest_seed, tree_ss, self._motion_seed, self._init_seed = ss.spawn(4)
        self.trees = [generate_tree(self.adjacency, s)
                      for s in tree_ss.spawn(config.tree_count)]
        self.motion = MotionModel(np.asarray(config.motion_std, dtype=np.float64))
        self.theta: Theta | None = None
        self.train_report: OptimReport | None = None
        self.feature_dicts = None
        self.raw_dicts = None
        self._raw_entries = []
        self._feature_entries = []

    def model(self) -> TrackerModel:
        return TrackerModel(self.theta, self.trees, self.feature_dicts,
                            self.raw_dicts, self.config)

    def _frame_features(self, frame: GrayImage, state: AffineState):
        region = warp_region(frame, state)
        patches = decompose_patches(region)
        raw = (region.ravel(), patches)
        feat = (region_descriptor(self.theta, patches, self.trees),
                leaf_descriptors(self.theta, patches))
        return raw, feat

    def _collect(self, frame: GrayImage, state: AffineState):
        raw, feat = self._frame_features(frame, state)
        self._raw_entries.append(raw)
        self._feature_entries.append(feat)
        self.raw_dicts = sparse.dictionaries_from_features(self._raw_entries)
        if len(self._feature_entries) == self.config.bootstrap_frames:
            if len(self._feature_entries) == 10:
                self.feature_dicts = sparse.build_dictionaries(self._feature_entries)
            else:
                self.feature_dicts = sparse.dictionaries_from_features(self._feature_entries)

    def run(self, frames, gt_first: AffineState) -> TrackResult:
        cfg = self.config
        if len(frames) == 0:
            raise ValueError("need at least one frame")

        samples = harvest_training_samples(frames[0], gt_first, cfg, self._harvest_seed)
        self.theta, self.train_report = train_first_frame(samples, cfg, self._init_seed)
        self._collect(frames[0], gt_first)

        states = [gt_first]
        likelihoods = [np.array([1.0])]
        update_frames: list = []
        cand_rng = np.random.default_rng(self._motion_seed)

        for idx in range(2, len(frames) + 1):
            frame = frames[idx - 1]
            candidates = sample_candidates(states[-1], self.motion, cfg.candidates, cand_rng)

            if self.feature_dicts is None:
                scores = coarse_log_scores(frame, candidates, self.raw_dicts, cfg)
                best = int(np.argmax(scores))
                state = candidates[best]
                likelihoods.append(np.exp(scores))
                if idx <= cfg.bootstrap_frames:
                    self._collect(frame, state)
            else:
                shortlist, _ = coarse_rank(frame, candidates, self.raw_dicts, cfg)
                state, likes = fine_rank(frame, shortlist, self.theta, self.trees,
                                         self.feature_dicts, cfg)
                likelihoods.append(likes)

            states.append(state)

            due = (idx > cfg.bootstrap_frames
                   and (idx - cfg.bootstrap_frames) % cfg.update_interval == 0
                   and self.feature_dicts is not None)
            if due:
                raw, feat = self._frame_features(frame, state)
                self.feature_dicts = sparse.update_dictionaries(
                    *self.feature_dicts, feat[0], feat[1], idx)
                self.raw_dicts = sparse.update_dictionaries(
                    *self.raw_dicts, raw[0], raw[1], idx)
                update_frames.append(idx)

        boxes = np.stack([box_from_state(s) for s in states])
        return TrackResult(states, boxes, likelihoods, update_frames,
                           bootstrap_completed=self.feature_dicts is not None)


def track_sequence(frames, gt_first: AffineState, config: TrackerConfig) -> TrackResult:
    """Run the full pipeline over a frame list from a first-frame state."""
    return Tracker(config).run(frames, gt_first)


def track_boxes(frames, gt_box, config: TrackerConfig) -> TrackResult:
    """Convenience wrapper taking the first-frame box instead of a state."""
    return track_sequence(frames, state_from_box(gt_box), config)
