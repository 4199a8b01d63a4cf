"""Router-side detection loop: queue, dispatcher, extractor, model, verdicts.

A producer thread pulls packets from a :class:`PacketSource` into a
bounded queue (blocking when full, never dropping). Workers take one
packet at a time; anything that is not a UDP/IPv4 query to port 53 is
accepted untouched, DNS queries are featurised and scored. DROP verdicts
raise a security event and, with ``auto_block``, a firewall rule keyed on
(source address, tunnel apex).
"""

from __future__ import annotations

import io
import json
import os
import queue
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Iterator, Protocol

import numpy as np

from .dns_wire import CapturedPacket, dns_query_of, iter_pcap
from .features import FeatureSchema, FeatureVector, SchemaFingerprintMismatch, extract_features

ACCEPT = "ACCEPT"
DROP = "DROP"
ATTACK_TYPE = "dns_tunneling"
EVENT_KEYS = ("ts", "attack_type", "src_ip", "dst_ip", "qname", "score", "action", "model_id")
BUCKETS_NS = (100_000, 500_000, 1_000_000, 5_000_000)
BUCKET_NAMES = ("<=100us", "<=500us", "<=1ms", "<=5ms", ">5ms")


class PipelineError(RuntimeError):
    pass


class SinkWriteFailure(PipelineError):
    pass


class DuplicateRule(PipelineError):
    pass


class UnknownRule(PipelineError):
    pass


# -- sources -----------------------------------------------------------------

class PacketSource(Protocol):
    def __iter__(self) -> Iterator[CapturedPacket]: ...


class PcapReplaySource:
    """Replays a capture; with ``pace`` sleeps to honour recorded gaps."""

    def __init__(self, stream: IO[bytes] | bytes, pace: bool = False, speedup: float = 1.0):
        self._stream = io.BytesIO(stream) if isinstance(stream, (bytes, bytearray)) else stream
        self.pace = pace
        self.speedup = speedup

    def __iter__(self) -> Iterator[CapturedPacket]:
        first_pkt = first_wall = None
        for pkt in iter_pcap(self._stream):
            if self.pace:
                t = pkt.timestamp[0] + pkt.timestamp[1] / 1e6
                if first_pkt is None:
                    first_pkt, first_wall = t, time.monotonic()
                else:
                    delay = (t - first_pkt) / self.speedup - (time.monotonic() - first_wall)
                    if delay > 0:
                        time.sleep(delay)
            yield pkt


class ListSource:
    def __init__(self, packets: Iterable[CapturedPacket]):
        self.packets = list(packets)

    def __iter__(self):
        return iter(self.packets)


# -- records -----------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    action: str
    score: float
    latency_ns: int


@dataclass(frozen=True)
class SecurityEvent:
    ts: float
    attack_type: str
    src_ip: str
    dst_ip: str
    qname: str
    score: float
    action: str
    model_id: str

    def to_line(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "SecurityEvent":
        raw = json.loads(line)
        if tuple(raw) != EVENT_KEYS:
            raise ValueError(f"event keys {tuple(raw)}")
        return cls(**raw)


@dataclass(frozen=True)
class FirewallRule:
    rule_id: int
    src_ip: str
    apex: str | None
    created_at: float
    origin_event: int
    port: int = 53
    action: str = DROP

    @property
    def key(self) -> tuple[str, str | None]:
        return self.src_ip, self.apex

    def render(self) -> str:
        match = f" match-suffix {self.apex}" if self.apex else ""
        return f"drop udp from {self.src_ip} to any port {self.port}{match} # rule {self.rule_id}"


@dataclass
class PipelineConfig:
    queue_capacity: int = 4096
    worker_count: int = 1
    score_threshold: float = 0.5
    auto_block: bool = True
    event_sink: str | None = None
    rule_sink: str | None = None
    model_id: str = "rf"
    keep_records: bool = True

    def __post_init__(self):
        if self.queue_capacity < 1:
            raise ValueError("queue capacity must be at least 1")
        if self.worker_count < 1:
            raise ValueError("need at least one worker")
        if not 0.0 < self.score_threshold < 1.0:
            raise ValueError(f"threshold {self.score_threshold} outside (0, 1)")


@dataclass
class PacketRecord:
    index: int
    is_dns: bool
    verdict: Verdict
    features: FeatureVector | None = None
    label: int | None = None


@dataclass
class LatencyHistogram:
    counts: list[int] = field(default_factory=lambda: [0] * len(BUCKET_NAMES))

    def add(self, ns: int) -> None:
        for i, bound in enumerate(BUCKETS_NS):
            if ns <= bound:
                self.counts[i] += 1
                return
        self.counts[-1] += 1

    def as_dict(self) -> dict[str, int]:
        return dict(zip(BUCKET_NAMES, self.counts))

    def render(self) -> str:
        return "\n".join(f"bucket {name}={n}" for name, n in self.as_dict().items())


@dataclass
class RunSummary:
    packets_seen: int = 0
    dns_queries: int = 0
    drops: int = 0
    rules_created: int = 0
    histogram: LatencyHistogram = field(default_factory=LatencyHistogram)
    max_queue_depth: int = 0
    records: list[PacketRecord] = field(default_factory=list)

    def render(self) -> str:
        lines = [
            f"packets_seen={self.packets_seen}",
            f"dns_queries={self.dns_queries}",
            f"drops={self.drops}",
            f"rules_created={self.rules_created}",
            f"max_queue_depth={self.max_queue_depth}",
        ]
        return "\n".join(lines) + "\n" + self.histogram.render()


# -- sinks -------------------------------------------------------------------

class LineSink:
    """Append-only text sink, flushed on every write. ``None`` path keeps lines in memory."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self.lines: list[str] = []
        self._fh = None
        if path is not None:
            try:
                self._fh = open(path, "a", encoding="utf-8")
            except OSError as exc:
                raise SinkWriteFailure(f"{path}: {exc}") from exc

    def write(self, line: str) -> None:
        self.lines.append(line)
        if self._fh is not None:
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
            except (OSError, ValueError) as exc:
                raise SinkWriteFailure(f"{self.path}: {exc}") from exc

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def emit_event(event: SecurityEvent, sink: LineSink) -> str:
    if event.action != DROP:
        raise ValueError("only DROP verdicts produce events")
    line = event.to_line()
    sink.write(line)
    return line


def read_events(text: str) -> list[SecurityEvent]:
    return [SecurityEvent.from_line(line) for line in text.splitlines() if line.strip()]


class RuleTable:
    """Active firewall rules; every change is rendered to ``sink``."""

    def __init__(self, sink: LineSink | None = None):
        self.sink = sink if sink is not None else LineSink()
        self.active: dict[int, FirewallRule] = {}
        self._by_key: dict[tuple[str, str | None], int] = {}
        self._next_id = 1

    def has(self, src_ip: str, apex: str | None) -> bool:
        return (src_ip, apex) in self._by_key

    def apply_rule(self, rule: FirewallRule) -> str:
        if rule.key in self._by_key:
            raise DuplicateRule(f"rule {self._by_key[rule.key]} already covers {rule.key}")
        if rule.rule_id in self.active:
            raise DuplicateRule(f"rule id {rule.rule_id} in use")
        self.active[rule.rule_id] = rule
        self._by_key[rule.key] = rule.rule_id
        self._next_id = max(self._next_id, rule.rule_id + 1)
        line = rule.render()
        self.sink.write(line)
        return line

    def new_rule(self, src_ip: str, apex: str | None, created_at: float, origin_event: int) -> FirewallRule:
        rule = FirewallRule(self._next_id, src_ip, apex, created_at, origin_event)
        self.apply_rule(rule)
        return rule

    def revoke_rule(self, rule_id: int) -> str:
        rule = self.active.pop(rule_id, None)
        if rule is None:
            raise UnknownRule(f"no active rule {rule_id}")
        del self._by_key[rule.key]
        line = f"revoke {rule_id}"
        self.sink.write(line)
        return line

    @classmethod
    def replay(cls, text: str, sink: LineSink | None = None) -> "RuleTable":
        """Rebuild the active set from a rule file's lines (not re-written)."""
        table = cls(LineSink())
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("revoke "):
                table.revoke_rule(int(line.split()[1]))
                continue
            body, _, tail = line.partition("# rule ")
            parts = body.split()
            if parts[:3] != ["drop", "udp", "from"] or not tail:
                raise ValueError(f"unparseable rule line: {line!r}")
            apex = parts[parts.index("match-suffix") + 1] if "match-suffix" in parts else None
            port = int(parts[parts.index("port") + 1])
            table.apply_rule(FirewallRule(int(tail), parts[3], apex, 0.0, -1, port=port))
        table.sink = sink if sink is not None else LineSink()
        return table


def apex_of(qname: str) -> str:
    labels = qname.split(".")
    return ".".join(labels[-2:])


# -- the pipeline --------------------------------------------------------------

_STOP = object()


class _MonitoredQueue(queue.Queue):
    """Bounded queue that records the deepest occupancy it reached."""

    def __init__(self, maxsize: int):
        super().__init__(maxsize)
        self.max_depth = 0

    def _put(self, item):
        super()._put(item)
        if len(self.queue) > self.max_depth:
            self.max_depth = len(self.queue)


class Detector:
    """Per-packet decision: dispatch, featurise, score. Shared read-only by workers."""

    def __init__(self, model, threshold: float = 0.5):
        self.model = model
        self.schema: FeatureSchema = model.schema
        self.threshold = threshold
        self._idx = np.asarray(self.schema.indices, dtype=np.int64)
        self._fast = hasattr(model, "score")

    def score(self, fv: FeatureVector) -> float:
        x = np.asarray(fv, dtype=np.float64)[self._idx]
        if self._fast:
            return self.model.score(x)
        return self.model.predict_one(x)[1]

    def decide(self, pkt: CapturedPacket):
        """(meta, query, features, score, action) with meta None for non-DNS."""
        mq = dns_query_of(pkt)
        if mq is None:
            return None, None, None, 0.0, ACCEPT
        meta, q = mq
        fv = extract_features(meta, q)
        s = self.score(fv)
        return meta, q, fv, s, DROP if s >= self.threshold else ACCEPT


def run_pipeline(source: PacketSource, model, config: PipelineConfig | None = None,
                 schema: FeatureSchema | None = None,
                 events: LineSink | None = None, rules: RuleTable | None = None) -> RunSummary:
    config = config or PipelineConfig()
    if schema is not None and schema.fingerprint != model.schema.fingerprint:
        raise SchemaFingerprintMismatch(
            f"pipeline schema {schema.fingerprint} != model schema {model.schema.fingerprint}")
    detector = Detector(model, config.score_threshold)
    own_events = events is None
    events = events if events is not None else LineSink(config.event_sink)
    if rules is None:
        rules = RuleTable(LineSink(config.rule_sink))
        own_rules = True
    else:
        own_rules = False

    q: _MonitoredQueue = _MonitoredQueue(config.queue_capacity)
    summary = RunSummary()
    out_lock = threading.Lock()
    errors: list[BaseException] = []
    records: dict[int, PacketRecord] = {}

    def produce():
        try:
            for i, pkt in enumerate(source):
                if errors:
                    break
                q.put((i, pkt))
        except BaseException as exc:  # surfaced after join
            errors.append(exc)
        finally:
            for _ in range(config.worker_count):
                q.put(_STOP)

    def work():
        while True:
            item = q.get()
            if item is _STOP:
                return
            i, pkt = item
            t0 = time.perf_counter_ns()
            try:
                meta, query, fv, s, action = detector.decide(pkt)
            except Exception as exc:
                errors.append(exc)
                continue
            latency = max(1, time.perf_counter_ns() - t0)
            verdict = Verdict(action, s, latency)
            with out_lock:
                summary.packets_seen += 1
                summary.histogram.add(latency)
                if meta is not None:
                    summary.dns_queries += 1
                if config.keep_records:
                    records[i] = PacketRecord(i, meta is not None, verdict, fv,
                                              None if meta is None else int(action == DROP))
                if action != DROP:
                    continue
                summary.drops += 1
                event = SecurityEvent(meta.ts, ATTACK_TYPE, meta.src_ip, meta.dst_ip,
                                      query.qname, s, action, config.model_id)
                try:
                    emit_event(event, events)
                    if config.auto_block:
                        apex = apex_of(query.qname)
                        if not rules.has(meta.src_ip, apex):
                            rules.new_rule(meta.src_ip, apex, meta.ts, summary.drops - 1)
                            summary.rules_created += 1
                except SinkWriteFailure as exc:
                    errors.append(exc)

    producer = threading.Thread(target=produce, name="packet-receiver", daemon=True)
    workers = [threading.Thread(target=work, name=f"worker-{k}", daemon=True)
               for k in range(config.worker_count)]
    producer.start()
    for w in workers:
        w.start()
    producer.join()
    for w in workers:
        w.join()
    if own_events:
        events.close()
    if own_rules:
        rules.sink.close()
    if errors:
        raise errors[0]
    summary.max_queue_depth = q.max_depth
    summary.records = [records[i] for i in sorted(records)]
    return summary


# -- latency bench -------------------------------------------------------------

@dataclass
class LatencyReport:
    n: int
    median_ns: float
    p99_ns: float
    histogram: LatencyHistogram

    def render(self) -> str:
        return (f"n={self.n}\nmedian_ns={self.median_ns:.0f}\np99_ns={self.p99_ns:.0f}\n"
                + self.histogram.render())


def bench_latency(model, packets: list[CapturedPacket], threshold: float = 0.5,
                  warmup: int = 200) -> LatencyReport:
    """Time dispatch + extraction + scoring + verdict for each packet in a tight loop."""
    detector = Detector(model, threshold)
    for pkt in packets[:warmup]:
        detector.decide(pkt)
    clock = time.perf_counter_ns
    lat = np.empty(len(packets), dtype=np.int64)
    hist = LatencyHistogram()
    for i, pkt in enumerate(packets):
        t0 = clock()
        detector.decide(pkt)
        lat[i] = max(1, clock() - t0)
    for ns in lat:
        hist.add(int(ns))
    return LatencyReport(len(lat), float(np.median(lat)), float(np.percentile(lat, 99)), hist)


def random_query_packets(n: int, seed: int = 0) -> list[CapturedPacket]:
    """``n`` query frames with random names, a mix of benign-looking and encoded labels."""
    from .dns_wire import DnsQuery, build_udp_frame, encode_dns_query

    rng = np.random.default_rng(seed)
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_"))
    qtypes = np.array([1, 28, 16, 5, 10, 12, 33, 65])
    out = []
    for i in range(n):
        n_labels = int(rng.integers(1, 6))
        labels = ["".join(rng.choice(alphabet[: 26 if rng.random() < 0.5 else 64],
                                     size=int(rng.integers(1, 40))))
                  for _ in range(n_labels)]
        q = DnsQuery.from_name(".".join(labels) + ".com", qtype=int(rng.choice(qtypes)),
                               txn_id=i & 0xFFFF)
        frame = build_udp_frame("192.168.1.20", "192.168.1.1", 40000 + i % 20000, 53,
                                encode_dns_query(q), ident=i)
        out.append(CapturedPacket((1_700_000_000 + i // 1000, i % 1000 * 1000), frame))
    return out
