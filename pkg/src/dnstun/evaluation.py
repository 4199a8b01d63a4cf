"""Detection metrics, the stratified hold-out protocol and feature ranking."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .features import FEATURE_NAMES, FeatureSchema, SchemaFingerprintMismatch
from .model import Dataset


class EvaluationError(ValueError):
    pass


class EmptyEvaluation(EvaluationError):
    pass


class TooFewRows(EvaluationError):
    pass


class UnknownFeature(EvaluationError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true, dtype=bool)
        p = np.asarray(y_pred, dtype=bool)
        if t.shape != p.shape:
            raise ValueError("label arrays differ in shape")
        return cls(tp=int((t & p).sum()), tn=int((~t & ~p).sum()),
                   fp=int((~t & p).sum()), fn=int((t & ~p).sum()))


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    pre: float
    rec: float
    f1: float
    counts: ConfusionCounts
    degenerate: frozenset[str] = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        return {
            "acc": self.acc, "pre": self.pre, "rec": self.rec, "f1": self.f1,
            "counts": asdict(self.counts), "degenerate": sorted(self.degenerate),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def table(self, model_name: str = "RF") -> str:
        head = f"{'Model':<16}{'ACC (%)':>9}{'REC (%)':>9}{'PRE (%)':>9}{'F1 (%)':>9}"
        row = (f"{model_name:<16}{100 * self.acc:>9.2f}{100 * self.rec:>9.2f}"
               f"{100 * self.pre:>9.2f}{100 * self.f1:>9.2f}")
        return head + "\n" + row


def compute_metrics(c: ConfusionCounts) -> MetricsReport:
    if c.total <= 0:
        raise EmptyEvaluation("no evaluated rows")
    degenerate = set()
    acc = (c.tp + c.tn) / c.total
    if c.tp + c.fp:
        pre = c.tp / (c.tp + c.fp)
    else:
        pre = 0.0
        degenerate.add("pre")
    if c.tp + c.fn:
        rec = c.tp / (c.tp + c.fn)
    else:
        rec = 0.0
        degenerate.add("rec")
    if degenerate or pre + rec == 0:
        f1 = 0.0
        degenerate.add("f1")
    else:
        f1 = 2 * pre * rec / (pre + rec)
    return MetricsReport(acc, pre, rec, f1, c, frozenset(degenerate))


def evaluate(model, data: Dataset) -> MetricsReport:
    if len(data) == 0:
        raise EmptyEvaluation("no rows")
    labels, _ = model.predict_batch(data.X)
    return compute_metrics(ConfusionCounts.from_labels(data.y, labels))


def evaluate_cross_env(model, foreign: Dataset) -> MetricsReport:
    """Score a dataset from another environment with no refitting."""
    if foreign.schema.fingerprint != model.schema.fingerprint:
        raise SchemaFingerprintMismatch(
            f"data schema {foreign.schema.fingerprint} != model schema {model.schema.fingerprint}")
    return evaluate(model, foreign)


def train_count(n: int, fraction: float) -> int:
    """Rows of one class that go to training: round half up, keeping one on each side."""
    k = int(np.floor(n * fraction + 0.5))
    return min(max(k, 1), n - 1)


def split_train_test(data: Dataset, train_fraction: float = 0.85,
                     seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified random split; each class is cut as close to the fraction as integers allow."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction {train_fraction} leaves an empty side")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(data.y == cls)
        if len(idx) < 2:
            raise TooFewRows(f"class {cls} has {len(idx)} rows, need 2")
        idx = rng.permutation(idx)
        k = train_count(len(idx), train_fraction)
        train_idx.append(idx[:k])
        test_idx.append(idx[k:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return data.subset(tr), data.subset(te)


def rank_features(model, schema: FeatureSchema | None = None) -> list[tuple[str, float]]:
    """Features by descending importance; ties keep canonical order."""
    schema = schema or model.schema
    imp = model.importances
    if imp is None:
        raise EvaluationError(f"{model.kind} has no importances")
    imp = np.asarray(imp, dtype=np.float64)
    names = schema.names
    if len(names) != len(imp):
        raise EvaluationError(f"{len(imp)} importances for {len(names)} features")
    order = sorted(range(len(names)), key=lambda i: (-imp[i], i))
    return [(names[i], float(imp[i])) for i in order]


def cumulative_importance(ranked: list[tuple[str, float]]) -> list[tuple[str, float]]:
    out, total = [], 0.0
    for name, value in ranked:
        total += value
        out.append((name, total))
    return out


def prune_schema(ranked: Iterable[tuple[str, float]] | FeatureSchema,
                 drop: Iterable[str]) -> FeatureSchema:
    """Schema without the ``drop`` features.

    ``ranked`` may be a ranking (its names define the starting set) or a schema.
    """
    if isinstance(ranked, FeatureSchema):
        current = set(ranked.names)
    else:
        current = {name for name, _ in ranked}
    drop = set(drop)
    unknown = drop - current
    if unknown:
        raise UnknownFeature(f"not in schema: {sorted(unknown)}")
    keep = [n for n in FEATURE_NAMES if n in current and n not in drop]
    return FeatureSchema.from_names(keep)
