from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..features import FeatureSchema, SchemaMismatch, apply_schema


class ModelError(ValueError):
    pass


class EmptyDataset(ModelError):
    pass


class SingleClass(ModelError):
    pass


class KTooLarge(ModelError):
    pass


class BadFormat(ModelError):
    pass


class UnsupportedVersion(BadFormat):
    pass


@dataclass
class Dataset:
    """Feature rows already reduced to ``schema``'s active columns."""

    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64).reshape(-1, self.schema.width)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if len(self.X) != len(self.y):
            raise ValueError(f"{len(self.X)} rows but {len(self.y)} labels")
        if len(self.y) and not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @classmethod
    def from_vectors(cls, rows: Iterable[tuple[Sequence[float], int]],
                     schema: FeatureSchema | None = None) -> "Dataset":
        """Build from full 16-component vectors, selecting ``schema``'s columns."""
        schema = schema or FeatureSchema.full()
        rows = list(rows)
        X = np.array([apply_schema(v, schema) for v, _ in rows], dtype=np.float64)
        y = np.array([label for _, label in rows], dtype=np.int64)
        return cls(X.reshape(-1, schema.width), y, schema)

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.schema)

    def check_trainable(self, allow_pure: bool = False) -> None:
        if len(self.y) == 0:
            raise EmptyDataset("no rows")
        if not allow_pure and len(np.unique(self.y)) < 2:
            raise SingleClass("training data holds a single class")


def as_row(v: Sequence[float], schema: FeatureSchema) -> np.ndarray:
    """Accept either a full 16-vector or an already-reduced one."""
    x = np.asarray(v, dtype=np.float64).reshape(-1)
    if x.shape[0] == schema.width:
        return x
    if x.shape[0] == len(schema.mask):
        return x[list(schema.indices)]
    raise SchemaMismatch(f"vector of width {x.shape[0]} for schema of width {schema.width}")


def as_matrix(X, schema: FeatureSchema) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] == schema.width:
        return np.ascontiguousarray(X)
    if X.shape[1] == len(schema.mask):
        return np.ascontiguousarray(X[:, list(schema.indices)])
    raise SchemaMismatch(f"matrix of width {X.shape[1]} for schema of width {schema.width}")
