"""Portable JSON model documents (format version "1")."""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from ..features import FEATURE_NAMES, FeatureSchema, SchemaFingerprintMismatch
from .base import BadFormat, UnsupportedVersion
from .forest import ForestModel, ForestParams
from .knn import KnnModel
from .tree import ArrayTree, DecisionTreeModel, TreeParams

FORMAT_VERSION = "1"


def model_to_dict(model) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "schema": {"names": list(model.schema.names), "fingerprint": model.schema.fingerprint},
    }
    if isinstance(model, ForestModel):
        doc["seed"] = model.params.seed
        doc["params"] = dataclasses.asdict(model.params)
        doc["trees"] = [t.to_dict() for t in model.trees]
    elif isinstance(model, DecisionTreeModel):
        doc["seed"] = model.seed
        doc["params"] = dataclasses.asdict(model.params)
        doc["trees"] = [model.tree.to_dict()]
    elif isinstance(model, KnnModel):
        doc["seed"] = None
        doc["params"] = {"k": model.k}
        doc["trees"] = []
        doc["knn"] = {
            "mean": model.mean.tolist(),
            "std": model.std.tolist(),
            "X": model.X.tolist(),
            "y": model.y.tolist(),
        }
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    imp = model.importances
    doc["importances"] = None if imp is None else np.asarray(imp).tolist()
    return doc


def save_model(model) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":"))


def _schema_from(doc: dict) -> FeatureSchema:
    try:
        names = doc["schema"]["names"]
        fp = doc["schema"]["fingerprint"]
    except (KeyError, TypeError):
        raise BadFormat("missing schema") from None
    if not isinstance(names, list) or any(n not in FEATURE_NAMES for n in names):
        raise BadFormat(f"bad schema names: {names!r}")
    if list(names) != [n for n in FEATURE_NAMES if n in names]:
        raise BadFormat("schema names not in canonical order")
    schema = FeatureSchema.from_names(names)
    if schema.fingerprint != fp:
        raise SchemaFingerprintMismatch(f"document says {fp}, names hash to {schema.fingerprint}")
    return schema


def load_model(text: str):
    if not text or not text.strip():
        raise BadFormat("empty document")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadFormat(str(exc)) from None
    if not isinstance(doc, dict):
        raise BadFormat("document is not an object")
    if doc.get("version") != FORMAT_VERSION:
        raise UnsupportedVersion(f"version {doc.get('version')!r}")
    schema = _schema_from(doc)
    kind = doc.get("kind")
    imp = doc.get("importances")
    importances = None if imp is None else np.asarray(imp, dtype=np.float64)
    try:
        if kind == "random_forest":
            params = ForestParams(**doc["params"])
            trees = [ArrayTree.from_dict(t) for t in doc["trees"]]
            if not trees:
                raise BadFormat("forest without trees")
            for t in trees:
                t.validate(schema.width)
            return ForestModel(trees, schema, params, importances)
        if kind == "decision_tree":
            tree = ArrayTree.from_dict(doc["trees"][0])
            tree.validate(schema.width)
            return DecisionTreeModel(tree, schema, TreeParams(**doc["params"]), importances,
                                     doc.get("seed"))
        if kind == "knn":
            body = doc["knn"]
            X = np.asarray(body["X"], dtype=np.float64).reshape(-1, schema.width)
            return KnnModel(int(doc["params"]["k"]), X, np.asarray(body["y"], dtype=np.int64),
                            np.asarray(body["mean"], dtype=np.float64),
                            np.asarray(body["std"], dtype=np.float64), schema)
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, BadFormat):
            raise
        raise BadFormat(f"{kind}: {exc}") from None
    raise BadFormat(f"unknown model kind {kind!r}")
