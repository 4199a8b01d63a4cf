from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..features import FeatureSchema
from .base import Dataset, as_matrix, as_row
from .tree import ArrayTree, PackedTrees, build_tree


@dataclass
class ForestParams:
    n_trees: int = 100
    max_features: int | None = None  # None: floor(sqrt(width))
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 0

    def resolved_max_features(self, width: int) -> int:
        if self.max_features is None:
            return max(1, math.isqrt(width))
        return max(1, min(self.max_features, width))


@dataclass
class ForestModel:
    trees: list[ArrayTree]
    schema: FeatureSchema
    params: ForestParams = field(default_factory=ForestParams)
    importances: np.ndarray | None = None
    kind = "random_forest"

    def __post_init__(self):
        self._packed = PackedTrees.pack(self.trees)

    @property
    def seed(self) -> int:
        return self.params.seed

    @property
    def n_features(self) -> int:
        return self.schema.width

    def score(self, x: np.ndarray) -> float:
        """Mean leaf attack fraction; ``x`` must already be schema-reduced."""
        return self._packed.score(x)

    def predict_one(self, v) -> tuple[int, float]:
        s = self._packed.score(as_row(v, self.schema))
        return int(s >= 0.5), float(s)

    def predict_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        scores = self._packed.score_batch(as_matrix(X, self.schema))
        return (scores >= 0.5).astype(np.int64), scores


def train_random_forest(data: Dataset, params: ForestParams | None = None) -> ForestModel:
    """Bagged CART ensemble with per-node feature subsampling.

    Tree ``i`` draws from its own stream spawned off the root seed, so the
    result does not depend on the order trees are grown in.
    """
    params = params or ForestParams()
    data.check_trainable()
    n, width = data.X.shape
    max_features = params.resolved_max_features(width)
    streams = np.random.SeedSequence(params.seed).spawn(params.n_trees)

    trees = []
    per_tree = np.zeros(width)
    for stream in streams:
        rng = np.random.Generator(np.random.Philox(stream))
        sample = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        tree, decrease = build_tree(
            data.X, data.y, sample,
            max_features=max_features, rng=rng,
            max_depth=params.max_depth,
            min_samples_split=params.min_samples_split,
            min_samples_leaf=params.min_samples_leaf,
        )
        trees.append(tree)
        total = decrease.sum()
        if total > 0:
            per_tree += decrease / total
    importances = per_tree / params.n_trees
    total = importances.sum()
    if total > 0:
        importances = importances / total
    return ForestModel(trees, data.schema, params, importances)
