"""CART decision trees stored as flat node arrays.

Splits minimise the weighted Gini impurity of the two children. Candidate
thresholds are midpoints between consecutive distinct values; a sample
goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from ..features import FeatureSchema
from .base import Dataset, as_matrix, as_row

LEAF = -1
_EPS = 1e-12


@dataclass
class ArrayTree:
    feature: np.ndarray    # int64, LEAF for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray       # int64, -1 for leaves
    right: np.ndarray
    counts: np.ndarray     # (n_nodes, 2) int64: benign, attack

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def attack_fraction(self) -> np.ndarray:
        return self.counts[:, 1] / self.counts.sum(axis=1)

    def leaf_of(self, x: np.ndarray) -> int:
        node = 0
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        while feature[node] != LEAF:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return node

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["counts"], dtype=np.int64).reshape(-1, 2),
        )

    def validate(self, width: int) -> None:
        n = self.n_nodes
        if n == 0:
            raise ValueError("tree has no nodes")
        arrays = (self.threshold, self.left, self.right, self.counts)
        if any(len(a) != n for a in arrays):
            raise ValueError("node arrays differ in length")
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            node = stack.pop()
            if seen[node]:
                raise ValueError(f"node {node} reached twice")
            seen[node] = True
            f = self.feature[node]
            if f == LEAF:
                if self.counts[node].min() < 0 or self.counts[node].sum() < 1:
                    raise ValueError(f"leaf {node} has bad counts")
                continue
            if not 0 <= f < width:
                raise ValueError(f"node {node} uses feature {f} outside width {width}")
            for child in (self.left[node], self.right[node]):
                if not 0 < child < n:
                    raise ValueError(f"node {node} has child {child}")
                stack.append(int(child))
        if not seen.all():
            raise ValueError("unreachable nodes")


def gini(counts) -> float:
    total = counts[0] + counts[1]
    if total == 0:
        return 0.0
    p = counts[1] / total
    return 2.0 * p * (1.0 - p)


def _best_split_on(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best threshold on one feature: (score, threshold) or None.

    ``score`` is sum over children of (b^2 + a^2) / n, which is maximal
    exactly where the weighted child Gini impurity is minimal.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs[0] == xs[-1]:
        return None
    m = len(xs)
    ys = y[order]
    pos = np.cumsum(ys)[:-1].astype(np.float64)
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    neg = n_left - pos
    pos_r = float(ys.sum()) - pos
    neg_r = n_right - pos_r
    score = (pos * pos + neg * neg) / n_left + (pos_r * pos_r + neg_r * neg_r) / n_right
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    i = int(np.argmax(score))
    lo, hi = xs[i], xs[i + 1]
    thr = lo / 2.0 + hi / 2.0
    if thr >= hi or not np.isfinite(thr):
        thr = lo
    return float(score[i]), float(thr)


def build_tree(X: np.ndarray, y: np.ndarray, sample: np.ndarray, *,
               max_features: int | None = None,
               rng: np.random.Generator | None = None,
               max_depth: int | None = None,
               min_samples_split: int = 2,
               min_samples_leaf: int = 1) -> tuple[ArrayTree, np.ndarray]:
    """Grow one tree on rows ``sample`` (repeats allowed, as in a bootstrap).

    Returns the tree and its unnormalised impurity decrease per feature.
    With ``max_features`` below the width, each node draws a random feature
    order and evaluates features until that many non-constant ones were seen.
    """
    n_feat = X.shape[1]
    if max_features is None or max_features >= n_feat:
        max_features = n_feat
        rng = None
    Xt = np.ascontiguousarray(X.T)
    decrease = np.zeros(n_feat)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        pos = int(y[idx].sum())
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((len(idx) - pos, pos))
        return len(feature) - 1

    root = new_node(sample)
    stack = [(root, sample, 0)]
    while stack:
        node, idx, depth = stack.pop()
        neg, pos = counts[node]
        m = neg + pos
        if pos == 0 or neg == 0 or m < min_samples_split:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        yn = y[idx]
        order = range(n_feat) if rng is None else rng.permutation(n_feat)
        best = None  # (score, feature, threshold)
        seen = 0
        for f in order:
            if seen >= max_features:
                break
            found = _best_split_on(Xt[f, idx], yn, min_samples_leaf)
            if found is None:
                xf = Xt[f, idx]
                if xf.min() == xf.max():
                    continue  # constant features don't count towards max_features
                seen += 1
                continue
            seen += 1
            score, thr = found
            if best is None or score > best[0] or (score == best[0] and f < best[1]):
                best = (score, int(f), thr)
        if best is None:
            continue
        score, f, thr = best
        gain = score - (neg * neg + pos * pos) / m
        if gain <= _EPS * m:
            continue
        go_left = Xt[f, idx] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        decrease[f] += gain
        lnode = new_node(li)
        r = new_node(ri)
        stack.append((r, ri, depth + 1))
        stack.append((lnode, li, depth + 1))
        left[node] = lnode
        right[node] = r

    tree = ArrayTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.int64).reshape(-1, 2),
    )
    return tree, decrease


@numba.njit(cache=True)
def _walk(x, feature, threshold, left, right, roots, value):
    total = 0.0
    for t in range(roots.shape[0]):
        node = roots[t]
        while feature[node] >= 0:
            if x[feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        total += value[node]
    return total / roots.shape[0]


@numba.njit(cache=True)
def _walk_batch(X, feature, threshold, left, right, roots, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = _walk(X[i], feature, threshold, left, right, roots, value)
    return out


@dataclass
class PackedTrees:
    """All trees concatenated into global node arrays for compiled traversal."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    roots: np.ndarray
    value: np.ndarray

    @classmethod
    def pack(cls, trees: list[ArrayTree]) -> "PackedTrees":
        offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]]).astype(np.int64)
        lefts, rights = [], []
        for off, t in zip(offsets, trees):
            is_leaf = t.feature == LEAF
            lefts.append(np.where(is_leaf, -1, t.left + off))
            rights.append(np.where(is_leaf, -1, t.right + off))
        return cls(
            np.concatenate([t.feature for t in trees]),
            np.concatenate([t.threshold for t in trees]),
            np.concatenate(lefts).astype(np.int64),
            np.concatenate(rights).astype(np.int64),
            offsets,
            np.concatenate([t.attack_fraction for t in trees]),
        )

    def score(self, x: np.ndarray) -> float:
        return _walk(x, self.feature, self.threshold, self.left, self.right, self.roots, self.value)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return _walk_batch(X, self.feature, self.threshold, self.left, self.right,
                           self.roots, self.value)


@dataclass
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    allow_pure: bool = False


@dataclass
class DecisionTreeModel:
    tree: ArrayTree
    schema: FeatureSchema
    params: TreeParams = field(default_factory=TreeParams)
    importances: np.ndarray | None = None
    seed: int | None = None
    kind = "decision_tree"

    def __post_init__(self):
        self._packed = PackedTrees.pack([self.tree])

    def predict_one(self, v) -> tuple[int, float]:
        node = self.tree.leaf_of(as_row(v, self.schema))
        neg, pos = self.tree.counts[node]
        # strict majority; ties go to benign
        return int(pos > neg), float(pos / (neg + pos))

    def predict_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        scores = self._packed.score_batch(as_matrix(X, self.schema))
        return (scores > 0.5).astype(np.int64), scores


def _normalise(v: np.ndarray) -> np.ndarray:
    total = v.sum()
    return v / total if total > 0 else np.zeros_like(v)


def train_decision_tree(data: Dataset, params: TreeParams | None = None) -> DecisionTreeModel:
    params = params or TreeParams()
    data.check_trainable(allow_pure=params.allow_pure)
    tree, decrease = build_tree(
        data.X, data.y, np.arange(len(data)),
        max_depth=params.max_depth,
        min_samples_split=params.min_samples_split,
        min_samples_leaf=params.min_samples_leaf,
    )
    return DecisionTreeModel(tree, data.schema, params, _normalise(decrease))
