"""Stateless per-query features.

Every value is computed from a single packet: the IP total length and the
question section. Nothing is carried between calls, so batch extraction
over a capture and the streaming pipeline produce identical vectors.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .dns_wire import DnsQuery, PacketMeta

FEATURE_NAMES: tuple[str, ...] = (
    "ip_length",
    "query_length",
    "subdomain_count",
    "subdomain_average",
    "shannon_entropy",
    "max_subdomain_length",
    "query_type",
    "special_characters",
    "char_freq_mean",
    "char_freq_std",
    "char_freq_min",
    "char_freq_max",
    "numeric_characters",
    "lower_characters",
    "upper_characters",
    "query_class",
)
N_FEATURES = len(FEATURE_NAMES)

# dropped after the importance analysis: least informative three
DEFAULT_DROP = frozenset({"upper_characters", "subdomain_count", "query_length"})


class FeatureError(ValueError):
    pass


class EmptyName(FeatureError):
    pass


class SchemaMismatch(FeatureError):
    pass


class BadHeader(FeatureError):
    pass


class BadRow(FeatureError):
    pass


class FeatureVector(NamedTuple):
    ip_length: float
    query_length: float
    subdomain_count: float
    subdomain_average: float
    shannon_entropy: float
    max_subdomain_length: float
    query_type: float
    special_characters: float
    char_freq_mean: float
    char_freq_std: float
    char_freq_min: float
    char_freq_max: float
    numeric_characters: float
    lower_characters: float
    upper_characters: float
    query_class: float


@dataclass(frozen=True)
class FeatureSchema:
    """Which of the canonical features a model consumes."""

    mask: tuple[bool, ...] = (True,) * N_FEATURES

    def __post_init__(self):
        if len(self.mask) != N_FEATURES:
            raise SchemaMismatch(f"mask has {len(self.mask)} entries, need {N_FEATURES}")
        if not any(self.mask):
            raise SchemaMismatch("schema selects no features")

    @classmethod
    def full(cls) -> "FeatureSchema":
        return cls()

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "FeatureSchema":
        names = list(names)
        unknown = set(names) - set(FEATURE_NAMES)
        if unknown:
            raise SchemaMismatch(f"unknown features: {sorted(unknown)}")
        if len(set(names)) != len(names):
            raise SchemaMismatch("duplicate feature names")
        return cls(tuple(n in names for n in FEATURE_NAMES))

    @classmethod
    def pruned(cls) -> "FeatureSchema":
        return cls(tuple(n not in DEFAULT_DROP for n in FEATURE_NAMES))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, keep in zip(FEATURE_NAMES, self.mask) if keep)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, keep in enumerate(self.mask) if keep)

    @property
    def width(self) -> int:
        return sum(self.mask)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(",".join(self.names).encode()).hexdigest()[:16]


def extract_features(meta: PacketMeta, q: DnsQuery) -> FeatureVector:
    name = q.qname
    if not name:
        raise EmptyName("query name is empty")
    n = len(name)
    label_lens = [len(label) for label in q.labels]

    freqs = Counter(name).values()
    distinct = len(freqs)
    entropy = 0.0
    for f in freqs:
        p = f / n
        entropy -= p * math.log2(p)
    mean = n / distinct
    var = sum((f - mean) ** 2 for f in freqs) / distinct

    digits = lower = upper = dots = 0
    for ch in name:
        if "a" <= ch <= "z":
            lower += 1
        elif "0" <= ch <= "9":
            digits += 1
        elif "A" <= ch <= "Z":
            upper += 1
        elif ch == ".":
            dots += 1
    special = n - digits - lower - upper - dots

    return FeatureVector(
        float(meta.ip_total_length),
        float(n),
        float(len(label_lens)),
        sum(label_lens) / len(label_lens),
        entropy,
        float(max(label_lens)),
        float(q.qtype),
        float(special),
        mean,
        math.sqrt(var),
        float(min(freqs)),
        float(max(freqs)),
        float(digits),
        float(lower),
        float(upper),
        float(q.qclass),
    )


def apply_schema(v: Sequence[float], schema: FeatureSchema) -> tuple[float, ...]:
    if len(v) != N_FEATURES:
        raise SchemaMismatch(f"vector has {len(v)} components, need {N_FEATURES}")
    return tuple(v[i] for i in schema.indices)


def vectors_to_matrix(vectors: Iterable[Sequence[float]], schema: FeatureSchema | None = None) -> np.ndarray:
    X = np.array(list(vectors), dtype=np.float64).reshape(-1, N_FEATURES)
    if schema is not None:
        X = X[:, list(schema.indices)]
    return X


def features_to_csv(rows: Iterable[tuple[Sequence[float], int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*FEATURE_NAMES, "label"])
    for vec, label in rows:
        if len(vec) != N_FEATURES:
            raise SchemaMismatch(f"vector has {len(vec)} components")
        w.writerow([repr(float(x)) for x in vec] + [int(label)])
    return buf.getvalue()


def csv_to_features(text: str) -> list[tuple[FeatureVector, int]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != [*FEATURE_NAMES, "label"]:
        raise BadHeader(f"unexpected header: {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != N_FEATURES + 1:
            raise BadRow(f"line {lineno}: {len(rec)} fields")
        try:
            vec = FeatureVector(*(float(x) for x in rec[:-1]))
            label = int(rec[-1])
        except ValueError as exc:
            raise BadRow(f"line {lineno}: {exc}") from None
        if label not in (0, 1):
            raise BadRow(f"line {lineno}: label {label}")
        rows.append((vec, label))
    return rows


class SchemaFingerprintMismatch(SchemaMismatch):
    pass
