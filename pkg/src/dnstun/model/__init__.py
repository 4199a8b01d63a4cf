"""Tree-ensemble and nearest-neighbour classifiers for query features."""

from .base import (BadFormat, Dataset, EmptyDataset, KTooLarge, ModelError, SingleClass,
                   UnsupportedVersion)
from .forest import ForestModel, ForestParams, train_random_forest
from .knn import KnnModel, train_knn
from .serialize import load_model, save_model
from .tree import ArrayTree, DecisionTreeModel, TreeParams, gini, train_decision_tree


def predict(model, v) -> tuple[int, float]:
    """(label, attack score) for one vector, full or schema-reduced."""
    return model.predict_one(v)


def predict_batch(model, X):
    return model.predict_batch(X)


__all__ = [
    "ArrayTree", "BadFormat", "Dataset", "DecisionTreeModel", "EmptyDataset", "ForestModel",
    "ForestParams", "KTooLarge", "KnnModel", "ModelError", "SingleClass", "TreeParams",
    "UnsupportedVersion", "gini", "load_model", "predict", "predict_batch", "save_model",
    "train_decision_tree", "train_knn", "train_random_forest",
]
