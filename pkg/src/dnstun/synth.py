"""Labelled synthetic DNS traffic: benign lookups and DNS tunnels.

A profile describes one network environment: which legitimate names its
devices resolve, and how an infected device there encodes data into
query names under an attacker-controlled apex domain. Low-throughput
tunnels leak a few bytes per query at human timescales; high-throughput
tunnels pack each query to the 255-byte name limit and fire them
back-to-back.
"""

from __future__ import annotations

import base64
import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._domains import SMART_HOME, WORKSTATION, zipf
from .dns_wire import (MAX_LABEL_LEN, MAX_NAME_LEN, QTYPES, CapturedPacket, DnsQuery,
                       build_udp_frame, encode_dns_query, pcap_bytes)

ENCODINGS = ("base64url", "base32hex")
MODES = ("low", "high")

# (qtype code, weight) used by every tunnel client
TUNNEL_QTYPE_MIX = ((QTYPES["TXT"], 0.45), (QTYPES["NULL"], 0.2),
                    (QTYPES["CNAME"], 0.2), (QTYPES["A"], 0.15))
BENIGN_PREFIXES = ((None, 0.55), ("www", 0.2), ("api", 0.1), ("cdn", 0.1), ("mail", 0.05))

LOW_CHUNK_MAX = 8
HIGH_MESSAGE_RANGE = (200, 1500)
HIGH_GAP_MAX_S = 0.005
LOW_GAP_MIN_S = 1.0


class SynthError(ValueError):
    pass


class PayloadTooSmall(SynthError):
    pass


@dataclass(frozen=True)
class SynthProfile:
    env_name: str
    benign_domains: tuple[tuple[str, float], ...]
    benign_qtype_mix: tuple[tuple[str, float], ...]
    tunnel_domain: str
    tunnel_encoding: str = "base64url"
    tunnel_label_len: int = 32
    throughput_mode: str = "high"
    rate_qps: float = 2.0
    seed: int = 0
    benign_hosts: tuple[str, ...] = ("192.168.1.10", "192.168.1.11", "192.168.1.12")
    infected_host: str = "192.168.1.66"
    resolver: str = "192.168.1.1"

    def __post_init__(self):
        if self.tunnel_encoding not in ENCODINGS:
            raise SynthError(f"unknown encoding {self.tunnel_encoding!r}")
        if self.throughput_mode not in MODES:
            raise SynthError(f"unknown mode {self.throughput_mode!r}")
        if not 16 <= self.tunnel_label_len <= MAX_LABEL_LEN:
            raise SynthError(f"label length {self.tunnel_label_len} outside [16, 63]")
        for _, w in (*self.benign_domains, *self.benign_qtype_mix):
            if w <= 0:
                raise SynthError("weights must be positive")
        if self.rate_qps <= 0:
            raise SynthError("rate must be positive")
        if queries_capacity(self) < 1:
            raise SynthError("tunnel apex leaves no room for payload labels")

    def with_mode(self, mode: str) -> "SynthProfile":
        return dataclasses.replace(self, throughput_mode=mode)

    @classmethod
    def from_json(cls, text: str) -> "SynthProfile":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise SynthError("profile must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise SynthError(f"unknown profile fields: {sorted(extra)}")
        for key in ("benign_domains", "benign_qtype_mix"):
            if key in raw:
                raw[key] = tuple((str(k), float(v)) for k, v in raw[key])
        if "benign_hosts" in raw:
            raw["benign_hosts"] = tuple(raw["benign_hosts"])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise SynthError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)


@dataclass
class LabelRecord:
    packet_index: int
    label: int
    env: str
    mode: str


@dataclass
class TunnelSession:
    mode: str
    payload_bytes: int


@dataclass
class Environment:
    packets: list[CapturedPacket]
    manifest: list[LabelRecord] = field(default_factory=list)

    def pcap(self) -> bytes:
        return pcap_bytes(self.packets)

    def manifest_csv(self) -> str:
        return manifest_to_csv(self.manifest)


# -- encoding ----------------------------------------------------------------

def encode_chunk(data: bytes, encoding: str) -> str:
    """Unpadded encoding in a DNS-safe alphabet."""
    if encoding == "base64url":
        return base64.urlsafe_b64encode(data).decode().rstrip("=")
    if encoding == "base32hex":
        return base64.b32hexencode(data).decode().rstrip("=").lower()
    raise SynthError(f"unknown encoding {encoding!r}")


def decode_chunk(text: str, encoding: str) -> bytes:
    if encoding == "base64url":
        return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    if encoding == "base32hex":
        return base64.b32hexdecode(text.upper() + "=" * (-len(text) % 8))
    raise SynthError(f"unknown encoding {encoding!r}")


def _bytes_for_chars(chars: int, encoding: str) -> int:
    if encoding == "base64url":
        return chars * 3 // 4
    return chars * 5 // 8


def labels_per_query(profile: SynthProfile) -> int:
    """Payload labels that fit beside the counter label and the apex."""
    apex_wire = len(profile.tunnel_domain) + 2
    counter_wire = 5
    return (MAX_NAME_LEN - apex_wire - counter_wire) // (profile.tunnel_label_len + 1)


def queries_capacity(profile: SynthProfile) -> int:
    """Payload bytes carried by one fully packed high-throughput query."""
    return _bytes_for_chars(labels_per_query(profile) * profile.tunnel_label_len,
                            profile.tunnel_encoding)


def tunnel_qname(profile: SynthProfile, counter: int, chunk: bytes) -> str:
    text = encode_chunk(chunk, profile.tunnel_encoding)
    L = profile.tunnel_label_len
    labels = [f"{counter & 0xFFFF:04x}"]
    labels += [text[i:i + L] for i in range(0, len(text), L)]
    return ".".join(labels) + "." + profile.tunnel_domain


def payload_from_qname(profile: SynthProfile, qname: str) -> bytes:
    """Inverse of :func:`tunnel_qname` (counter and apex stripped)."""
    suffix = "." + profile.tunnel_domain
    if not qname.endswith(suffix):
        raise SynthError(f"{qname!r} not under {profile.tunnel_domain}")
    labels = qname[: -len(suffix)].split(".")
    return decode_chunk("".join(labels[1:]), profile.tunnel_encoding)


ENV_A = SynthProfile(
    env_name="env_A",
    benign_domains=zipf(SMART_HOME),
    benign_qtype_mix=(("A", 60), ("AAAA", 25), ("PTR", 5), ("TXT", 2), ("SRV", 3), ("HTTPS", 5)),
    tunnel_domain="exfil.example",
    tunnel_encoding="base64url",
    tunnel_label_len=32,
    seed=1,
)

ENV_B = SynthProfile(
    env_name="env_B",
    benign_domains=zipf(WORKSTATION),
    benign_qtype_mix=(("A", 50), ("AAAA", 35), ("PTR", 6), ("TXT", 1), ("SRV", 2), ("HTTPS", 6)),
    tunnel_domain="t.c2relay.net",
    tunnel_encoding="base32hex",
    tunnel_label_len=48,
    rate_qps=1.0,
    seed=2,
    benign_hosts=("10.0.0.21", "10.0.0.22", "10.0.0.23", "10.0.0.24"),
    infected_host="10.0.0.99",
    resolver="10.0.0.1",
)

PROFILES = {"env_a": ENV_A, "env_b": ENV_B}


# -- packet generation -------------------------------------------------------

def _weighted(rng: np.random.Generator, items: Sequence[tuple], size: int | None = None):
    values = [v for v, _ in items]
    w = np.array([w for _, w in items], dtype=np.float64)
    idx = rng.choice(len(values), size=size, p=w / w.sum())
    if size is None:
        return values[int(idx)]
    return [values[int(i)] for i in idx]


def _ts(t: float) -> tuple[int, int]:
    usec = int(round(t * 1e6))
    return usec // 1_000_000, usec % 1_000_000


def _packet(t: float, src: str, dst: str, sport: int, qname: str, qtype: int,
            txn: int) -> CapturedPacket:
    q = DnsQuery.from_name(qname, qtype=qtype, txn_id=txn)
    frame = build_udp_frame(src, dst, sport, 53, encode_dns_query(q), ident=txn)
    return CapturedPacket(_ts(t), frame)


def _rng(profile: SynthProfile, *stream: int) -> np.random.Generator:
    return np.random.default_rng([profile.seed, *stream])


def _reverse_name(rng: np.random.Generator, hosts: Sequence[str]) -> str:
    if rng.random() < 0.5:
        octets = hosts[int(rng.integers(len(hosts)))].split(".")
    else:
        octets = [str(int(x)) for x in rng.integers(1, 255, size=4)]
    return ".".join(reversed(octets)) + ".in-addr.arpa"


def generate_benign(profile: SynthProfile, n: int, start: float = 0.0,
                    rng: np.random.Generator | None = None) -> list[CapturedPacket]:
    """``n`` legitimate lookups with exponential inter-arrival times."""
    if n <= 0:
        return []
    rng = rng if rng is not None else _rng(profile, 0)
    domains = _weighted(rng, profile.benign_domains, n)
    qtypes = _weighted(rng, profile.benign_qtype_mix, n)
    prefixes = _weighted(rng, BENIGN_PREFIXES, n)
    gaps = rng.exponential(1.0 / profile.rate_qps, size=n)
    hosts = rng.integers(len(profile.benign_hosts), size=n)
    out = []
    t = start
    for i in range(n):
        t += gaps[i]
        qtype_name = qtypes[i]
        if qtype_name == "PTR":
            name = _reverse_name(rng, profile.benign_hosts)
        elif qtype_name == "SRV":
            name = f"_{_weighted(rng, (('http', 2), ('sip', 1), ('xmpp-client', 1)))}._tcp.{domains[i]}"
        else:
            name = domains[i] if prefixes[i] is None else f"{prefixes[i]}.{domains[i]}"
        src = profile.benign_hosts[hosts[i]]
        out.append(_packet(t, src, profile.resolver, int(rng.integers(1024, 65535)), name,
                           QTYPES[qtype_name], int(rng.integers(65536))))
    return out


def _chunks(profile: SynthProfile, payload: bytes, rng: np.random.Generator) -> list[bytes]:
    if profile.throughput_mode == "low":
        out, i = [], 0
        while i < len(payload):
            size = int(rng.integers(1, LOW_CHUNK_MAX + 1))
            out.append(payload[i:i + size])
            i += size
        return out
    per_query = queries_capacity(profile)
    return [payload[i:i + per_query] for i in range(0, len(payload), per_query)]


def generate_tunnel(profile: SynthProfile, payload_bytes: int, start: float = 0.0,
                    rng: np.random.Generator | None = None,
                    payload: bytes | None = None) -> list[CapturedPacket]:
    """Exfiltrate ``payload_bytes`` random bytes from the infected host."""
    rng = rng if rng is not None else _rng(profile, 1)
    if payload is None:
        if payload_bytes < 1:
            raise PayloadTooSmall("payload must be at least 1 byte")
        payload = rng.bytes(payload_bytes)
    elif not payload:
        raise PayloadTooSmall("payload must be at least 1 byte")
    counter = int(rng.integers(0, 0x10000))
    sport = int(rng.integers(1024, 65535))
    t = start
    out = []
    for chunk in _chunks(profile, payload, rng):
        name = tunnel_qname(profile, counter, chunk)
        qtype = _weighted(rng, TUNNEL_QTYPE_MIX)
        out.append(_packet(t, profile.infected_host, profile.resolver, sport, name, qtype,
                           int(rng.integers(65536))))
        counter += 1
        if profile.throughput_mode == "high":
            t += float(rng.uniform(0.0002, HIGH_GAP_MAX_S))
        else:
            t += LOW_GAP_MIN_S + float(rng.exponential(4.0))
    return out


def sessions_for_packets(profile: SynthProfile, n_packets: int) -> list[TunnelSession]:
    """Tunnel sessions adding up to roughly ``n_packets`` queries, half per mode.

    High sessions carry one 200-1500 byte message each; low sessions leak a
    run of small chunks (mean (1 + LOW_CHUNK_MAX) / 2 bytes per query).
    """
    rng = _rng(profile, 2)
    sessions = []
    per_query = queries_capacity(profile)
    budget_high = n_packets // 2
    budget_low = n_packets - budget_high
    while budget_high > 0:
        size = int(rng.integers(HIGH_MESSAGE_RANGE[0], HIGH_MESSAGE_RANGE[1] + 1))
        size = min(size, budget_high * per_query)
        sessions.append(TunnelSession("high", size))
        budget_high -= math.ceil(size / per_query)
    low_mean = (1 + LOW_CHUNK_MAX) / 2
    while budget_low > 0:
        queries = min(budget_low, int(rng.integers(20, 200)))
        sessions.append(TunnelSession("low", max(1, int(queries * low_mean))))
        budget_low -= queries
    order = rng.permutation(len(sessions))
    return [sessions[i] for i in order]


def build_environment(profile: SynthProfile, benign_n: int,
                      tunnel_sessions: Sequence[TunnelSession] = ()) -> Environment:
    """Benign and tunnel packets interleaved by timestamp, with labels."""
    if benign_n < 0:
        raise SynthError("benign count must be non-negative")
    rng = _rng(profile, 3)
    benign = generate_benign(profile, benign_n, start=1_700_000_000.0, rng=rng)
    span = max(benign_n / profile.rate_qps, 60.0)
    tagged = [(p, 0, "benign") for p in benign]
    for session in tunnel_sessions:
        start = 1_700_000_000.0 + float(rng.uniform(0, span))
        pkts = generate_tunnel(profile.with_mode(session.mode), session.payload_bytes,
                               start=start, rng=rng)
        tagged += [(p, 1, session.mode) for p in pkts]
    # stable: ties keep generation order
    tagged.sort(key=lambda item: item[0].timestamp)
    packets = [p for p, _, _ in tagged]
    manifest = [LabelRecord(i, label, profile.env_name, mode)
                for i, (_, label, mode) in enumerate(tagged)]
    return Environment(packets, manifest)


def desk_environment(profile: SynthProfile, benign_n: int = 10_000,
                     tunnel_packets: int = 10_000) -> Environment:
    return build_environment(profile, benign_n, sessions_for_packets(profile, tunnel_packets))


def sessions_for_bytes(total: int, mode: str, profile: SynthProfile) -> list[TunnelSession]:
    """Split a byte budget into sessions; ``mixed`` gives 5% of bytes to low mode."""
    if total <= 0:
        return []
    if mode == "mixed":
        low = max(1, total // 20)
        return (sessions_for_bytes(total - low, "high", profile)
                + sessions_for_bytes(low, "low", profile))
    if mode not in MODES:
        raise SynthError(f"unknown mode {mode!r}")
    rng = _rng(profile, 4)
    out = []
    while total > 0:
        if mode == "high":
            n = min(total, int(rng.integers(HIGH_MESSAGE_RANGE[0], HIGH_MESSAGE_RANGE[1] + 1)))
        else:
            n = min(total, int(rng.integers(50, 500)))
        out.append(TunnelSession(mode, n))
        total -= n
    return out


# -- manifest ----------------------------------------------------------------

MANIFEST_HEADER = ["packet_index", "label", "env", "mode"]


def manifest_to_csv(records: Sequence[LabelRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_HEADER)
    for r in records:
        w.writerow([r.packet_index, r.label, r.env, r.mode])
    return buf.getvalue()


def csv_to_manifest(text: str) -> list[LabelRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != MANIFEST_HEADER:
        raise SynthError(f"bad manifest header {header}")
    out = []
    last = -1
    for rec in reader:
        if not rec:
            continue
        r = LabelRecord(int(rec[0]), int(rec[1]), rec[2], rec[3])
        if r.packet_index <= last:
            raise SynthError("manifest indices must be strictly increasing")
        last = r.packet_index
        out.append(r)
    return out

