"""Stateless DNS-tunneling detection: features, tree ensembles, and a per-packet verdict pipeline."""

from .dns_wire import CapturedPacket, DnsQuery, PacketMeta, decode_dns_query, encode_dns_query
from .features import FEATURE_NAMES, FeatureSchema, FeatureVector, extract_features
from .model import load_model, predict, save_model, train_random_forest

__version__ = "0.1.0"

__all__ = [
    "CapturedPacket", "DnsQuery", "FEATURE_NAMES", "FeatureSchema", "FeatureVector", "PacketMeta",
    "decode_dns_query", "encode_dns_query", "extract_features", "load_model", "predict",
    "save_model", "train_random_forest",
]
