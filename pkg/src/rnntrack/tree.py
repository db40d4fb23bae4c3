"""Random binary merge trees over the patch grid.

Trees are grown bottom-up: start from the 9 patches as active nodes,
repeatedly pick a uniformly random pair of spatially adjacent active
nodes and fuse them, until a single root remains.  Adjacency between
grown nodes is inherited from their leaves (union of the children's
leaf neighborhoods minus absorbed leaves), so every merge joins two
regions that touch on the 3x3 grid.

Node ids: leaves are 1..k, internal nodes k+1..2k-1 in creation order
(9 leaves give internal nodes 10..17 with root 17).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID_LEAVES = 9

_ENUM_LEAF_CAP = 5


@dataclass(frozen=True)
class MergeTree:
    """Ordered merge list; each entry is (left, right, new) node ids."""

    merges: tuple

    @property
    def n_leaves(self) -> int:
        return len(self.merges) + 1

    @property
    def root(self) -> int:
        return self.merges[-1][2]

    def to_text(self) -> str:
        return "\n".join(f"{a} {b} {c}" for a, b, c in self.merges) + "\n"

    @staticmethod
    def from_text(text: str) -> "MergeTree":
        merges = []
        for line in text.strip().splitlines():
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"bad merge line: {line!r}")
            merges.append(tuple(int(p) for p in parts))
        return MergeTree(tuple(merges))


def grid_adjacency() -> np.ndarray:
    """4-connectivity of the 3x3 patch grid as a 9x9 boolean matrix."""
    a = np.zeros((GRID_LEAVES, GRID_LEAVES), dtype=bool)
    for i in range(GRID_LEAVES):
        r, c = divmod(i, 3)
        for dr, dc in ((0, 1), (1, 0)):
            rr, cc = r + dr, c + dc
            if rr < 3 and cc < 3:
                j = rr * 3 + cc
                a[i, j] = a[j, i] = True
    return a


def _leaf_neighbors(adjacency: np.ndarray):
    """Per-leaf neighbor sets, 1-based ids."""
    k = adjacency.shape[0]
    return {i + 1: {j + 1 for j in np.flatnonzero(adjacency[i])} for i in range(k)}


class _Worklist:
    """Active nodes, their leaf sets/neighborhoods and candidate pairs."""

    def __init__(self, adjacency: np.ndarray):
        adjacency = np.asarray(adjacency, dtype=bool)
        k = adjacency.shape[0]
        if adjacency.shape != (k, k) or np.any(adjacency != adjacency.T) or np.any(np.diag(adjacency)):
            raise ValueError("adjacency must be square, symmetric, zero-diagonal")
        neigh = _leaf_neighbors(adjacency)
        self.n_leaves = k
        self.leaves = {i: frozenset((i,)) for i in range(1, k + 1)}
        self.neigh = {i: frozenset(neigh[i]) for i in range(1, k + 1)}
        self.active = set(range(1, k + 1))
        self.pairs = sorted(
            (i, j) for i in self.active for j in self.active if i < j and j in self.neigh[i]
        )
        self.merges = []

    def merge(self, pair):
        a, b = pair
        new = self.n_leaves + len(self.merges) + 1
        self.merges.append((a, b, new))
        absorbed = self.leaves[a] | self.leaves[b]
        self.leaves[new] = absorbed
        self.neigh[new] = (self.neigh[a] | self.neigh[b]) - absorbed
        self.active.discard(a)
        self.active.discard(b)
        self.pairs = [p for p in self.pairs if a not in p and b not in p]
        for d in sorted(self.active):
            if self.neigh[new] & self.leaves[d]:
                self.pairs.append((d, new) if d < new else (new, d))
        self.active.add(new)
        self.pairs.sort()

    @property
    def done(self) -> bool:
        return len(self.active) == 1


def generate_tree(adjacency: np.ndarray, seed) -> MergeTree:
    """Grow one random merge tree; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    wl = _Worklist(adjacency)
    while not wl.done:
        pick = wl.pairs[int(rng.integers(len(wl.pairs)))]
        wl.merge(pick)
    return MergeTree(tuple(wl.merges))


def enumerate_trees(adjacency: np.ndarray) -> set:
    """All distinct merge trees the random procedure can produce.

    Exhaustive branch over every candidate-pair choice; guarded to small
    leaf counts since the sequence space grows combinatorially.
    """
    k = np.asarray(adjacency).shape[0]
    if k > _ENUM_LEAF_CAP:
        raise ValueError(f"enumerate_trees supports at most {_ENUM_LEAF_CAP} leaves, got {k}")
    found = set()

    def walk(wl: _Worklist):
        if wl.done:
            found.add(MergeTree(tuple(wl.merges)))
            return
        for pair in list(wl.pairs):
            branch = _Worklist.__new__(_Worklist)
            branch.n_leaves = wl.n_leaves
            branch.leaves = dict(wl.leaves)
            branch.neigh = dict(wl.neigh)
            branch.active = set(wl.active)
            branch.pairs = list(wl.pairs)
            branch.merges = list(wl.merges)
            branch.merge(pair)
            walk(branch)

    walk(_Worklist(adjacency))
    return found


def validate_tree(tree: MergeTree, adjacency: np.ndarray | None = None, n_leaves: int = GRID_LEAVES) -> None:
    """Raise ValueError unless the merge list is a well-formed tree.

    Checks merge count, id assignment order, single use of every child,
    unique root, and (when adjacency is given) spatial adjacency of the
    two merged leaf sets at every step.
    """
    if len(tree.merges) != n_leaves - 1:
        raise ValueError(f"expected {n_leaves - 1} merges, got {len(tree.merges)}")
    leaves = {i: frozenset((i,)) for i in range(1, n_leaves + 1)}
    neigh = _leaf_neighbors(adjacency) if adjacency is not None else None
    consumed = set()
    for t, (a, b, new) in enumerate(tree.merges):
        if new != n_leaves + 1 + t:
            raise ValueError(f"merge {t}: new node id {new}, expected {n_leaves + 1 + t}")
        for child in (a, b):
            if child not in leaves:
                raise ValueError(f"merge {t}: unknown child {child}")
            if child in consumed:
                raise ValueError(f"merge {t}: child {child} already consumed")
        if a == b:
            raise ValueError(f"merge {t}: children must differ")
        if neigh is not None:
            la, lb = leaves[a], leaves[b]
            if not any(neigh[u] & lb for u in la):
                raise ValueError(f"merge {t}: leaf sets {sorted(la)} and {sorted(lb)} not adjacent")
        consumed.update((a, b))
        leaves[new] = leaves[a] | leaves[b]
    root = tree.merges[-1][2]
    if leaves[root] != frozenset(range(1, n_leaves + 1)):
        raise ValueError("root does not cover all leaves")
