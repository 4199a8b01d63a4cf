from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureSchema
from .base import Dataset, EmptyDataset, KTooLarge, as_matrix, as_row


@dataclass
class KnnModel:
    """k-NN over z-scored features. Constant features are zeroed out."""

    k: int
    X: np.ndarray      # standardised training rows
    y: np.ndarray
    mean: np.ndarray
    std: np.ndarray    # 0 marks a constant feature
    schema: FeatureSchema
    kind = "knn"

    @property
    def importances(self):
        return None

    def standardise(self, X: np.ndarray) -> np.ndarray:
        scale = np.where(self.std > 0, self.std, 1.0)
        Z = (X - self.mean) / scale
        Z[..., self.std == 0] = 0.0
        return Z

    def _vote(self, d2: np.ndarray) -> tuple[int, float]:
        # stable sort: equal distances resolve to the earlier training row
        nearest = np.argsort(d2, kind="stable")[: self.k]
        attack = int(self.y[nearest].sum())
        return int(2 * attack > self.k), attack / self.k

    def predict_one(self, v) -> tuple[int, float]:
        z = self.standardise(as_row(v, self.schema))
        d2 = ((self.X - z) ** 2).sum(axis=1)
        return self._vote(d2)

    def predict_batch(self, X, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
        Z = self.standardise(as_matrix(X, self.schema))
        labels = np.empty(len(Z), dtype=np.int64)
        scores = np.empty(len(Z))
        for start in range(0, len(Z), chunk):
            block = Z[start:start + chunk]
            d2 = ((block[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            for j, row in enumerate(d2):
                labels[start + j], scores[start + j] = self._vote(row)
        return labels, scores


def train_knn(data: Dataset, k: int = 5) -> KnnModel:
    if len(data) == 0:
        raise EmptyDataset("no rows")
    if not 1 <= k <= len(data):
        raise KTooLarge(f"k={k} with {len(data)} rows")
    mean = data.X.mean(axis=0)
    std = data.X.std(axis=0)
    model = KnnModel(k, data.X, data.y.copy(), mean, std, data.schema)
    model.X = model.standardise(data.X)
    return model
