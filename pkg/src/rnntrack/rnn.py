"""Recursive network over patch merge trees.

One shared sigmoid layer lifts each 256-pixel patch into an n-dimensional
feature; a second shared layer composes two child features into their
parent, applied bottom-up along a merge tree; a softmax head on the root
separates target from background.  Training differentiates the averaged
cross-entropy over all samples, with error signals splitting at every
internal node and flowing into both children (the composition weights
accumulate contributions from every internal node, the patch weights
from every leaf).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagery import N_PATCHES, PATCH_DIM
from .tree import MergeTree, validate_tree

N_CLASSES = 2
N_NODES = 2 * N_PATCHES - 1  # 17

LABEL_TARGET = np.array([1.0, 0.0])
LABEL_BACKGROUND = np.array([0.0, 1.0])


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class Theta:
    """All learnable parameters.

    w_leaf:  (n, 256) patch-to-feature map        b_leaf:  (n,)
    w_merge: (n, n) child-composition map         b_merge: (n,)
    w_class: (2, n) root-to-logit map (no bias)
    """

    w_leaf: np.ndarray
    b_leaf: np.ndarray
    w_merge: np.ndarray
    b_merge: np.ndarray
    w_class: np.ndarray

    @property
    def n(self) -> int:
        return self.w_leaf.shape[0]

    def weight_count(self) -> int:
        """Learnable parameters excluding biases: 256n + n^2 + 2n."""
        return self.w_leaf.size + self.w_merge.size + self.w_class.size

    def blocks(self):
        return {
            "w_leaf": self.w_leaf,
            "b_leaf": self.b_leaf,
            "w_merge": self.w_merge,
            "b_merge": self.b_merge,
            "w_class": self.w_class,
        }

    def sq_norm(self) -> float:
        return float(sum(np.dot(b.ravel(), b.ravel()) for b in self.blocks().values()))

    def copy(self) -> "Theta":
        return Theta(*(b.copy() for b in self.blocks().values()))

    @staticmethod
    def zeros(n: int) -> "Theta":
        return Theta(
            np.zeros((n, PATCH_DIM)), np.zeros(n),
            np.zeros((n, n)), np.zeros(n),
            np.zeros((N_CLASSES, n)),
        )


def init_theta(n: int, seed) -> Theta:
    """Uniform [-0.01, 0.01] weights, zero biases."""
    if n < 1:
        raise ValueError("feature dimension must be at least 1")
    rng = np.random.default_rng(seed)
    t = Theta.zeros(n)
    t.w_leaf = rng.uniform(-0.01, 0.01, (n, PATCH_DIM))
    t.w_merge = rng.uniform(-0.01, 0.01, (n, n))
    t.w_class = rng.uniform(-0.01, 0.01, (N_CLASSES, n))
    return t


@dataclass(frozen=True)
class LabeledSample:
    """Nine patch vectors with a one-hot label and a fixed merge tree."""

    patches: np.ndarray  # (9, 256)
    label: np.ndarray  # (2,), one-hot
    tree: MergeTree

    def __post_init__(self):
        if self.patches.shape != (N_PATCHES, PATCH_DIM):
            raise ValueError(f"patches must be (9, 256), got {self.patches.shape}")
        if self.label.shape != (N_CLASSES,) or sorted(self.label.tolist()) != [0.0, 1.0]:
            raise ValueError("label must be one-hot over 2 classes")
        validate_tree(self.tree)


@dataclass
class TreeActivation:
    """Feature vectors of all 17 nodes from one forward pass."""

    values: np.ndarray  # (17, n), row i holds node id i+1
    tree: MergeTree

    def node(self, node_id: int) -> np.ndarray:
        return self.values[node_id - 1]

    @property
    def root(self) -> np.ndarray:
        return self.values[self.tree.root - 1]

    @property
    def leaves(self) -> np.ndarray:
        return self.values[:N_PATCHES]


def leaf_features(theta: Theta, patch: np.ndarray) -> np.ndarray:
    """Feature of a single raw patch; independent of any tree."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (PATCH_DIM,):
        raise ValueError(f"patch must be 256-dimensional, got {patch.shape}")
    return sigmoid(theta.w_leaf @ patch + theta.b_leaf)


def leaf_descriptors(theta: Theta, patches: np.ndarray) -> np.ndarray:
    """Features of all 9 patches, (9, n)."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (N_PATCHES, PATCH_DIM):
        raise ValueError(f"patches must be (9, 256), got {patches.shape}")
    return sigmoid(patches @ theta.w_leaf.T + theta.b_leaf)


def parent_features(theta: Theta, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Compose two child features; symmetric because both children share one map."""
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != (theta.n,) or right.shape != (theta.n,):
        raise ValueError("child features must match the feature dimension")
    return sigmoid(theta.w_merge @ (left + right) + theta.b_merge)


def _forward_batch(theta: Theta, patches: np.ndarray, trees) -> np.ndarray:
    """Activations (N, 17, n) for N samples, composed step-by-step.

    All trees have 8 merges; step t of every tree is processed in one
    vectorized sweep.
    """
    n_samples = patches.shape[0]
    acts = np.empty((n_samples, N_NODES, theta.n))
    flat = patches.reshape(n_samples * N_PATCHES, PATCH_DIM)
    acts[:, :N_PATCHES] = sigmoid(flat @ theta.w_leaf.T + theta.b_leaf).reshape(
        n_samples, N_PATCHES, theta.n)
    merges = np.array([t.merges for t in trees])  # (N, 8, 3)
    rows = np.arange(n_samples)
    for step in range(N_PATCHES - 1):
        a, b, c = merges[:, step, 0] - 1, merges[:, step, 1] - 1, merges[:, step, 2] - 1
        child_sum = acts[rows, a] + acts[rows, b]
        acts[rows, c] = sigmoid(child_sum @ theta.w_merge.T + theta.b_merge)
    return acts


def forward_tree(theta: Theta, patches: np.ndarray, tree: MergeTree) -> TreeActivation:
    """Full forward pass: leaf features, then parents in merge order."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (N_PATCHES, PATCH_DIM):
        raise ValueError(f"patches must be (9, 256), got {patches.shape}")
    validate_tree(tree)
    acts = _forward_batch(theta, patches[None], [tree])[0]
    return TreeActivation(acts, tree)


def region_descriptor(theta: Theta, patches: np.ndarray, trees) -> np.ndarray:
    """Element-wise mean of root activations across trees."""
    if len(trees) == 0:
        raise ValueError("at least one tree is required")
    patches = np.asarray(patches, dtype=np.float64)
    stacked = np.broadcast_to(patches, (len(trees), N_PATCHES, PATCH_DIM))
    acts = _forward_batch(theta, stacked, trees)
    roots = acts[np.arange(len(trees)), [t.root - 1 for t in trees]]
    return roots.mean(axis=0)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def classify(theta: Theta, root: np.ndarray) -> np.ndarray:
    """Class probabilities from a root feature; positive, sums to 1."""
    root = np.asarray(root, dtype=np.float64)
    if root.shape != (theta.n,):
        raise ValueError("root feature must match the feature dimension")
    return np.exp(_log_softmax(theta.w_class @ root))


def sample_loss(theta: Theta, sample: LabeledSample) -> float:
    """Cross-entropy of the predicted root label against the ground truth."""
    acts = forward_tree(theta, sample.patches, sample.tree)
    logq = _log_softmax(theta.w_class @ acts.root)
    return float(-np.dot(sample.label, logq))


def _stack_samples(samples):
    if len(samples) == 0:
        raise ValueError("at least one sample is required")
    patches = np.stack([s.patches for s in samples])
    labels = np.stack([s.label for s in samples])
    trees = [s.tree for s in samples]
    return patches, labels, trees


def objective(theta: Theta, samples, lam: float) -> float:
    """Mean cross-entropy plus (lam/2) * squared norm of all parameters."""
    if lam < 0:
        raise ValueError("regularization weight must be non-negative")
    patches, labels, trees = _stack_samples(samples)
    acts = _forward_batch(theta, patches, trees)
    roots = acts[np.arange(len(samples)), [t.root - 1 for t in trees]]
    logq = _log_softmax(roots @ theta.w_class.T)
    losses = -(labels * logq).sum(axis=1)
    return float(losses.mean() + 0.5 * lam * theta.sq_norm())


def gradient(theta: Theta, samples, lam: float) -> Theta:
    """Exact gradient of the training objective, in Theta shape.

    Gradients flow from the softmax head into the root, then split at
    each internal node in reverse merge order; the shared composition
    block sums over all internal nodes, the leaf block over all leaves.
    """
    if lam < 0:
        raise ValueError("regularization weight must be non-negative")
    patches, labels, trees = _stack_samples(samples)
    n_samples = len(samples)
    acts = _forward_batch(theta, patches, trees)
    merges = np.array([t.merges for t in trees])
    rows = np.arange(n_samples)

    roots = acts[rows, [t.root - 1 for t in trees]]
    logq = _log_softmax(roots @ theta.w_class.T)
    dlogits = np.exp(logq) - labels  # (N, 2)

    grad = Theta.zeros(theta.n)
    grad.w_class = dlogits.T @ roots

    node_grads = np.zeros_like(acts)
    node_grads[rows, [t.root - 1 for t in trees]] = dlogits @ theta.w_class
    for step in range(N_PATCHES - 2, -1, -1):
        a, b, c = merges[:, step, 0] - 1, merges[:, step, 1] - 1, merges[:, step, 2] - 1
        tau = acts[rows, c]
        s = node_grads[rows, c] * tau * (1.0 - tau)  # pre-activation signal
        grad.w_merge += s.T @ (acts[rows, a] + acts[rows, b])
        grad.b_merge += s.sum(axis=0)
        back = s @ theta.w_merge
        node_grads[rows, a] += back
        node_grads[rows, b] += back

    zeta = acts[:, :N_PATCHES].reshape(n_samples * N_PATCHES, theta.n)
    s_leaf = node_grads[:, :N_PATCHES].reshape(n_samples * N_PATCHES, theta.n)
    s_leaf = s_leaf * zeta * (1.0 - zeta)
    grad.w_leaf = s_leaf.T @ patches.reshape(n_samples * N_PATCHES, PATCH_DIM)
    grad.b_leaf = s_leaf.sum(axis=0)

    for name, block in grad.blocks().items():
        block /= n_samples
        block += lam * getattr(theta, name)
    return grad
