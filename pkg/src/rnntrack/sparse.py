"""Feature dictionaries and non-negative sparse coding.

Two dictionaries describe the target: a holistic one of whole-region
descriptors and a local one of per-patch descriptors tagged with their
grid position.  Candidates are scored by how cheaply their features
reconstruct from the dictionaries: the holistic cue maps reconstruction
error through exp(-alpha * err), the local cue measures how much of each
patch's coefficient mass lands on atoms from the same grid position.

The coder minimizes 0.5*||y - D b||^2 + lam * sum(b) subject to b >= 0 by
cyclic coordinate descent (atoms have unit norm, so each coordinate
update is a non-negative soft threshold).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .imagery import N_PATCHES

UNIT_NORM_TOL = 1e-10
CD_TOL = 1e-6
CD_MAX_SWEEPS = 500


@dataclass
class Dictionary:
    """Unit-norm feature atoms with per-atom provenance."""

    atoms: np.ndarray  # (d, K), unit L2 columns
    positions: np.ndarray  # (K,) int; 0 holistic, 1..9 local
    frames: np.ndarray  # (K,) int; insertion frame, drives FIFO replacement
    seed_flags: np.ndarray  # (K,) bool; first-frame atoms, never replaced

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.intp)
        self.frames = np.asarray(self.frames, dtype=np.intp)
        self.seed_flags = np.asarray(self.seed_flags, dtype=bool)
        k = self.atoms.shape[1]
        if not (self.positions.shape == self.frames.shape == self.seed_flags.shape == (k,)):
            raise ValueError("provenance arrays must have one entry per atom")
        norms = np.linalg.norm(self.atoms, axis=0)
        if k and np.abs(norms - 1.0).max() > UNIT_NORM_TOL:
            raise ValueError("dictionary atoms must have unit L2 norm")

    @property
    def size(self) -> int:
        return self.atoms.shape[1]

    @property
    def dim(self) -> int:
        return self.atoms.shape[0]

    def copy(self) -> "Dictionary":
        return Dictionary(self.atoms.copy(), self.positions.copy(),
                          self.frames.copy(), self.seed_flags.copy())


@dataclass
class SparseCode:
    coefficients: np.ndarray  # (K,), all >= 0
    reconstruction_error: float  # squared L2 residual


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise ValueError("cannot normalize a zero feature into an atom")
    return v / norm


def _lasso_batch(atoms: np.ndarray, targets: np.ndarray, lam: float,
                 tol: float = CD_TOL, max_sweeps: int = CD_MAX_SWEEPS) -> np.ndarray:
    """Coordinate-descent codes for a batch of targets; returns (B, K).

    Rows converge independently (each keeps sweeping until its largest
    coefficient change drops below tol), so results do not depend on how
    the batch is split.
    """
    corr = np.ascontiguousarray(targets @ atoms)  # (B, K)
    gram = np.ascontiguousarray(atoms.T @ atoms)  # (K, K), unit diagonal
    return _kernels.cd_lasso(gram, corr, lam, tol, max_sweeps)


def lasso_nn(dictionary: Dictionary, target: np.ndarray, lam: float,
             max_sweeps: int = CD_MAX_SWEEPS) -> SparseCode:
    """Non-negative sparse code of one target against the dictionary."""
    if dictionary.size == 0:
        raise ValueError("dictionary has no atoms")
    if lam < 0:
        raise ValueError("sparsity weight must be non-negative")
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (dictionary.dim,):
        raise ValueError(f"target dimension {target.shape} does not match atoms ({dictionary.dim},)")
    beta = _lasso_batch(dictionary.atoms, target[None], lam, max_sweeps=max_sweeps)[0]
    resid = target - dictionary.atoms @ beta
    return SparseCode(beta, float(resid @ resid))


def dictionaries_from_features(entries, seed_frames: int = 1):
    """Build (holistic, local) dictionaries from per-frame features.

    entries: one (region descriptor, (9, d) leaf features) pair per frame,
    in frame order starting at frame 1.  Atoms from the first seed_frames
    frames are marked immutable.
    """
    if len(entries) == 0:
        raise ValueError("at least one frame of features is required")
    h_atoms, h_frames, h_seed = [], [], []
    l_atoms, l_pos, l_frames, l_seed = [], [], [], []
    for idx, (descriptor, leaves) in enumerate(entries):
        frame = idx + 1
        leaves = np.asarray(leaves, dtype=np.float64)
        if leaves.shape[0] != N_PATCHES:
            raise ValueError("each frame needs 9 leaf features")
        h_atoms.append(_unit(np.asarray(descriptor, dtype=np.float64)))
        h_frames.append(frame)
        h_seed.append(frame <= seed_frames)
        for p in range(N_PATCHES):
            l_atoms.append(_unit(leaves[p]))
            l_pos.append(p + 1)
            l_frames.append(frame)
            l_seed.append(frame <= seed_frames)
    holistic = Dictionary(np.column_stack(h_atoms), np.zeros(len(h_atoms), dtype=int),
                          np.array(h_frames), np.array(h_seed))
    local = Dictionary(np.column_stack(l_atoms), np.array(l_pos),
                       np.array(l_frames), np.array(l_seed))
    return holistic, local


def build_dictionaries(frame_features):
    """Dictionaries from the first 10 frames: 10 holistic / 90 local atoms."""
    if len(frame_features) != 10:
        raise ValueError(f"expected features for exactly 10 frames, got {len(frame_features)}")
    return dictionaries_from_features(frame_features, seed_frames=1)


def holistic_log_score(dictionary: Dictionary, descriptor: np.ndarray,
                       lam: float, alpha: float) -> float:
    return -alpha * lasso_nn(dictionary, descriptor, lam).reconstruction_error


def holistic_score(dictionary: Dictionary, descriptor: np.ndarray,
                   lam: float, alpha: float) -> float:
    """exp(-alpha * reconstruction error); 1 for a perfect reconstruction."""
    return float(np.exp(holistic_log_score(dictionary, descriptor, lam, alpha)))


def _alignment_ratios(local_dict: Dictionary, leaf_stack: np.ndarray, lam: float) -> np.ndarray:
    """Per-patch aligned-mass ratios for stacked leaves (B*9 rows)."""
    beta = _lasso_batch(local_dict.atoms, leaf_stack, lam)
    totals = beta.sum(axis=1)
    onehot = (local_dict.positions[:, None] == np.arange(1, N_PATCHES + 1)).astype(np.float64)
    by_position = beta @ onehot  # (B*9, 9)
    rows = np.arange(leaf_stack.shape[0])
    aligned = by_position[rows, rows % N_PATCHES]
    return np.divide(aligned, totals, out=np.zeros_like(totals), where=totals > 0)


def local_score(local_dict: Dictionary, leaves: np.ndarray, lam: float) -> float:
    """Mean over the 9 patches of the same-position coefficient-mass share."""
    if local_dict.size == 0:
        raise ValueError("dictionary has no atoms")
    leaves = np.asarray(leaves, dtype=np.float64)
    if leaves.shape != (N_PATCHES, local_dict.dim):
        raise ValueError(f"expected (9, {local_dict.dim}) leaf features, got {leaves.shape}")
    return float(_alignment_ratios(local_dict, leaves, lam).mean())


def candidate_likelihood(holistic: float, local: float) -> float:
    """Joint confidence: product of the two cues."""
    return holistic * local


def score_candidates(holistic_dict: Dictionary, local_dict: Dictionary,
                     descriptors: np.ndarray, leaves: np.ndarray,
                     lam: float, alpha: float) -> np.ndarray:
    """Log-likelihood of each candidate, vectorized over the batch.

    Equals log(candidate_likelihood(holistic_score, local_score)) per
    candidate but stays rankable when exp(-alpha*err) underflows; -inf
    marks a zero local score.
    """
    n_cand = descriptors.shape[0]
    beta_h = _lasso_batch(holistic_dict.atoms, descriptors, lam)
    resid = descriptors - beta_h @ holistic_dict.atoms.T
    holistic_log = -alpha * (resid * resid).sum(axis=1)
    ratios = _alignment_ratios(local_dict, leaves.reshape(n_cand * N_PATCHES, -1), lam)
    local = ratios.reshape(n_cand, N_PATCHES).mean(axis=1)
    with np.errstate(divide="ignore"):
        return holistic_log + np.log(local)


def update_dictionaries(holistic: Dictionary, local: Dictionary,
                        descriptor: np.ndarray, leaves: np.ndarray, frame: int):
    """Swap the oldest non-seed atoms for this frame's features (FIFO).

    The holistic dictionary replaces one atom; the local dictionary
    replaces one atom per grid position.  Seed atoms never move; counts
    and unit norms are preserved.
    """
    leaves = np.asarray(leaves, dtype=np.float64)
    holistic, local = holistic.copy(), local.copy()

    replaceable = np.flatnonzero(~holistic.seed_flags)
    if replaceable.size:
        idx = replaceable[np.argmin(holistic.frames[replaceable])]
        holistic.atoms[:, idx] = _unit(np.asarray(descriptor, dtype=np.float64))
        holistic.frames[idx] = frame

    for p in range(1, N_PATCHES + 1):
        slots = np.flatnonzero((local.positions == p) & ~local.seed_flags)
        if slots.size:
            idx = slots[np.argmin(local.frames[slots])]
            local.atoms[:, idx] = _unit(leaves[p - 1])
            local.frames[idx] = frame
    return holistic, local
