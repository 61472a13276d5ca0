"""CART classification trees, a bootstrap forest and mean-decrease-impurity.

Trees are stored as flat parallel arrays (node ``i`` has children
``left[i]``/``right[i]``, ``-1`` for leaves) and grown by a numba kernel.
Every tree draws from its own ``numpy.random.default_rng(seed + tree_index)``
(PCG64) stream, so a forest is bit-identical under any parallel schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from numba import njit

from .tabular import Table

# decreases at or below this are treated as "no improvement"
_EPS = 1e-12
# decreases closer than this count as tied (float rounding breaks exact ties)
_TIE = 1e-12


def gini(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    n = counts.sum()
    if counts.size == 0 or n <= 0:
        raise ValueError("gini of an empty node")
    p = counts / n
    return float(1.0 - (p * p).sum())


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    decrease: float


@njit(cache=True)
def _segment_split(X, y, idx, start, end, f, n_classes, parent, order_buf, xs_buf, left):
    """Best threshold of feature ``f`` over rows ``idx[start:end]``.

    Returns (decrease, threshold, valid).  The first maximum along the sorted
    values wins, which is the lowest threshold.
    """
    n = end - start
    for i in range(n):
        xs_buf[i] = X[idx[start + i], f]
    order = np.argsort(xs_buf[:n], kind="mergesort")
    for i in range(n):
        order_buf[i] = idx[start + order[i]]
    total = np.zeros(n_classes)
    for i in range(n):
        total[y[order_buf[i]]] += 1.0
    left[:] = 0.0
    best_dec, best_thr, found = -np.inf, np.nan, False
    for i in range(n - 1):
        left[y[order_buf[i]]] += 1.0
        lo = xs_buf[order[i]]
        hi = xs_buf[order[i + 1]]
        if not hi > lo:
            continue
        nl = i + 1.0
        nr = n - nl
        sl = 0.0
        sr = 0.0
        for c in range(n_classes):
            sl += left[c] * left[c]
            r = total[c] - left[c]
            sr += r * r
        child = (nl - sl / nl + nr - sr / nr) / n
        dec = parent - child
        if not found or dec > best_dec + _TIE:
            thr = lo + (hi - lo) / 2.0
            if thr >= hi:  # adjacent floats: midpoint rounds up onto hi
                thr = lo
            best_dec, best_thr, found = dec, thr, True
    return best_dec, best_thr, found


@njit(cache=True)
def _best_over(X, y, idx, start, end, feats, n_classes, allow_zero, bufs):
    """(feature, threshold, decrease) over ``feats`` in the given order; -1 if none."""
    order_buf, xs_buf, left, counts = bufs
    n = end - start
    counts[:] = 0.0
    for i in range(start, end):
        counts[y[idx[i]]] += 1.0
    parent = 1.0
    for c in range(n_classes):
        p = counts[c] / n
        parent -= p * p
    best_f, best_thr, best_dec = -1, np.nan, 0.0
    for f in feats:
        dec, thr, ok = _segment_split(X, y, idx, start, end, f, n_classes, parent,
                                      order_buf, xs_buf, left)
        if ok and (best_f < 0 or dec > best_dec + _TIE):
            best_f, best_thr, best_dec = f, thr, dec
    if best_f >= 0:
        best_dec = max(best_dec, 0.0)
        if best_dec <= _EPS and not allow_zero:
            best_f = -1
    return best_f, best_thr, best_dec


def _buffers(n, n_classes):
    return (np.empty(n, dtype=np.int64), np.empty(n), np.empty(n_classes),
            np.empty(n_classes))


def best_split(X, y, candidate_features, n_classes=None, allow_zero=False) -> Optional[Split]:
    """Best Gini split of the rows ``(X, y)`` over ``candidate_features``.

    Thresholds are midpoints between consecutive distinct sorted values and
    rows with ``x <= threshold`` go left.  Ties (decreases within 1e-12) go to
    the lower feature id and then the lower threshold.  Returns None unless some split has a positive
    decrease (or, with ``allow_zero``, any split exists at all).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    k = int(y.max()) + 1 if n_classes is None else n_classes
    feats = np.array(sorted(int(f) for f in candidate_features), dtype=np.int64)
    idx = np.arange(len(y), dtype=np.int64)
    f, thr, dec = _best_over(X, y, idx, 0, len(y), feats, k, allow_zero, _buffers(len(y), k))
    return None if f < 0 else Split(int(f), float(thr), float(dec))


@dataclass(frozen=True)
class TreeNode:
    """Nested view of one node; ``feature is None`` marks a leaf."""

    class_counts: tuple
    samples: int
    feature: Optional[int] = None
    threshold: Optional[float] = None
    impurity_decrease: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    samples: np.ndarray
    decrease: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.left[node[active]] >= 0]
        return node

    def predict(self, X) -> np.ndarray:
        # argmax picks the lowest class index on plurality ties
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def root(self) -> TreeNode:
        def build(i):
            counts = tuple(int(c) for c in self.counts[i])
            if self.left[i] < 0:
                return TreeNode(counts, int(self.samples[i]))
            return TreeNode(counts, int(self.samples[i]), int(self.feature[i]),
                            float(self.threshold[i]), float(self.decrease[i]),
                            build(self.left[i]), build(self.right[i]))
        return build(0)

    def importance(self, n_features: int) -> np.ndarray:
        """Sample-weighted impurity decrease per feature, scaled by root size."""
        out = np.zeros(n_features)
        split = self.left >= 0
        np.add.at(out, self.feature[split], self.samples[split] * self.decrease[split])
        return out / self.samples[0]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 1000
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    features_per_split: Optional[int] = None  # None -> ceil(sqrt(n_features))
    seed: int = 0
    bootstrap: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")

    def max_features(self, n_features: int) -> int:
        m = self.features_per_split or math.ceil(math.sqrt(n_features))
        return max(1, min(m, n_features))


@njit(cache=True)
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15))
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _grow(X, y, n_classes, m, max_depth, min_samples_split, seed):
    n, n_features = X.shape
    cap = max(2 * n - 1, 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    samples = np.zeros(cap, dtype=np.int64)
    decrease = np.zeros(cap)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    bufs = (np.empty(n, dtype=np.int64), np.empty(n), np.empty(n_classes), np.empty(n_classes))
    perm = np.arange(n_features)
    state = np.uint64(seed)

    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    n_nodes = 1
    samples[0] = n
    for i in range(n):
        counts[0, y[i]] += 1
    stack[0] = (0, 0, n, 0)
    top = 1
    while top > 0:
        top -= 1
        node, start, end, depth = stack[top]
        size = end - start
        nonzero = 0
        for c in range(n_classes):
            if counts[node, c] > 0:
                nonzero += 1
        if size < min_samples_split or nonzero <= 1 or (max_depth >= 0 and depth >= max_depth):
            continue
        # partial Fisher-Yates: the first m entries of perm are the candidates
        for j in range(m):
            state, r = _splitmix64(state)
            pick = j + np.int64(r % np.uint64(n_features - j))
            perm[j], perm[pick] = perm[pick], perm[j]
        cand = np.sort(perm[:m].copy())
        f, thr, dec = _best_over(X, y, idx, start, end, cand, n_classes, False, bufs)
        if f < 0 and m < n_features:
            rest = np.sort(perm[m:].copy())
            f, thr, dec = _best_over(X, y, idx, start, end, rest, n_classes, False, bufs)
        if f < 0:
            # impure but no decrease anywhere (e.g. XOR): any separating split
            f, thr, dec = _best_over(X, y, idx, start, end, np.arange(n_features),
                                     n_classes, True, bufs)
        if f < 0:
            continue
        nl = 0
        nr = 0
        for i in range(start, end):
            r_ = idx[i]
            if X[r_, f] <= thr:
                idx[start + nl] = r_
                nl += 1
            else:
                tmp[nr] = r_
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = tmp[i]
        lnode, rnode = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = thr
        decrease[node] = dec
        left[node] = lnode
        right[node] = rnode
        samples[lnode] = nl
        samples[rnode] = nr
        for i in range(start, start + nl):
            counts[lnode, y[idx[i]]] += 1
        for i in range(start + nl, end):
            counts[rnode, y[idx[i]]] += 1
        stack[top] = (rnode, start + nl, end, depth + 1)
        stack[top + 1] = (lnode, start, start + nl, depth + 1)
        top += 2
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            samples[:n_nodes], decrease[:n_nodes], counts[:n_nodes])


def build_tree(X, y, n_classes, config: ForestConfig, rng: np.random.Generator) -> Tree:
    """Grow one tree on all rows of ``(X, y)``.

    Candidate features per node come from a splitmix64 stream seeded by one
    64-bit draw from ``rng``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    seed = int(rng.integers(0, 2**63, dtype=np.int64))
    depth = -1 if config.max_depth is None else int(config.max_depth)
    arrays = _grow(X, y, int(n_classes), config.max_features(X.shape[1]), depth,
                   int(config.min_samples_split), seed)
    return Tree(*arrays)


def _fit_one(X, y, n_classes, config, i):
    rng = np.random.default_rng(config.seed + i)
    if config.bootstrap:
        rows = rng.integers(0, X.shape[0], size=X.shape[0])
        return build_tree(X[rows], y[rows], n_classes, config, rng)
    return build_tree(X, y, n_classes, config, rng)


@dataclass
class Forest:
    trees: list
    config: ForestConfig
    n_features: int
    n_classes: int
    feature_names: tuple = field(default_factory=tuple)

    def predict(self, X) -> np.ndarray:
        """Majority vote of per-tree plurality classes; ties -> lower class."""
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for t in self.trees:
            np.add.at(votes, (rows, t.predict(X)), 1)
        return np.argmax(votes, axis=1)

    def importance(self) -> np.ndarray:
        total = np.zeros(self.n_features)
        for t in self.trees:
            total += t.importance(self.n_features)
        total /= len(self.trees)
        s = total.sum()
        return total / s if s > 0 else total


def fit_forest(X, y, config: ForestConfig = ForestConfig(), n_classes=None, feature_names=()) -> Forest:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("need at least one feature column")
    if X.shape[0] == 0:
        raise ValueError("cannot fit a forest on zero rows")
    k = int(y.max()) + 1 if n_classes is None else n_classes
    if config.n_jobs == 1:
        trees = [_fit_one(X, y, k, config, i) for i in range(config.n_trees)]
    else:
        trees = Parallel(n_jobs=config.n_jobs)(
            delayed(_fit_one)(X, y, k, config, i) for i in range(config.n_trees))
    return Forest(trees, config, X.shape[1], k, tuple(feature_names))


def predict(f: Forest, X) -> np.ndarray:
    return f.predict(np.atleast_2d(X))


@dataclass(frozen=True)
class RfScore:
    feature: str
    mdi: float


def importance(f: Forest) -> list[RfScore]:
    """Normalized MDI per feature (sums to 1 when any tree has a split)."""
    names = f.feature_names or tuple(f"f{i}" for i in range(f.n_features))
    return [RfScore(n, float(v)) for n, v in zip(names, f.importance())]


def rank_rf(t: Table, config: ForestConfig = ForestConfig()) -> list[RfScore]:
    """Fit a forest on the numeric columns of ``t`` and rank by MDI."""
    names = t.schema.numeric_names
    if not names:
        raise ValueError("table has no numeric features to rank")
    forest = fit_forest(t.numeric, t.labels, config, t.schema.n_classes, names)
    scores = importance(forest)
    order = sorted(range(len(scores)), key=lambda j: (-scores[j].mdi, j))
    return [scores[j] for j in order]


def write_ranking_csv(scores: list[RfScore], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("feature,mdi\n")
        for s in scores:
            fh.write(f"{s.feature},{s.mdi!r}\n")


def write_forest(f: Forest, path) -> None:
    """Dump every node in preorder, one CSV record per node (debugging aid)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tree,node,left,right,feature,threshold,samples,impurity_decrease,class_counts\n")
        for ti, t in enumerate(f.trees):
            todo = [0]
            while todo:
                i = todo.pop()
                if t.left[i] >= 0:
                    todo.extend((t.right[i], t.left[i]))
                counts = " ".join(str(int(c)) for c in t.counts[i])
                thr = "" if t.left[i] < 0 else repr(float(t.threshold[i]))
                feat = "" if t.left[i] < 0 else str(int(t.feature[i]))
                fh.write(f"{ti},{i},{t.left[i]},{t.right[i]},{feat},{thr},{t.samples[i]},"
                         f"{float(t.decrease[i])!r},{counts}\n")
