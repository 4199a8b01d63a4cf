import io
import json
import threading
import time

import numpy as np
import pytest

from dnstun.dns_wire import CapturedPacket, build_tcp_frame, dns_query_of, pcap_bytes
from dnstun.features import FeatureSchema, SchemaFingerprintMismatch, apply_schema, extract_features
from dnstun.model import ArrayTree, DecisionTreeModel, predict_batch
from dnstun.pipeline import (DROP, EVENT_KEYS, DuplicateRule, FirewallRule, LineSink, ListSource,
                             PcapReplaySource, PipelineConfig, RuleTable, SecurityEvent,
                             SinkWriteFailure, UnknownRule, bench_latency, emit_event,
                             random_query_packets, read_events, run_pipeline)
from dnstun.synth import ENV_A, generate_benign, generate_tunnel


def constant_model(score, schema=None):
    schema = schema or FeatureSchema.pruned()
    neg = 0 if score else 1
    leaf = ArrayTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                     np.array([[neg, 1 - neg]]))
    return DecisionTreeModel(leaf, schema)


def test_empty_source(rf_env_a):
    s = run_pipeline(ListSource([]), rf_env_a)
    assert (s.packets_seen, s.dns_queries, s.drops, s.rules_created) == (0, 0, 0, 0)
    assert sum(s.histogram.counts) == 0


def test_streaming_matches_batch(rf_env_a, env_a):
    pkts = env_a.packets[:3000]
    pcap = pcap_bytes(pkts)
    summary = run_pipeline(PcapReplaySource(pcap), rf_env_a)
    schema = rf_env_a.schema
    offline_fv = [extract_features(*dns_query_of(p)) for p in pkts]
    X = np.array([apply_schema(v, schema) for v in offline_fv])
    labels, _ = predict_batch(rf_env_a, X)
    assert [r.index for r in summary.records] == list(range(len(pkts)))
    assert [r.features for r in summary.records] == offline_fv
    assert [r.label for r in summary.records] == labels.tolist()
    assert summary.drops == int(labels.sum())


def test_non_dns_is_accepted_without_features(rf_env_a):
    frames = [build_tcp_frame("10.1.1.1", "10.1.1.2", 1000, 80, b"hello")] * 5
    s = run_pipeline(ListSource([CapturedPacket((0, 0), f) for f in frames]), rf_env_a)
    assert s.packets_seen == 5 and s.dns_queries == 0 and s.drops == 0
    assert all(r.features is None and r.verdict.action == "ACCEPT" for r in s.records)


def test_auto_block_makes_one_rule_per_pair():
    pkts = generate_tunnel(ENV_A.with_mode("high"), 3000)
    events, rules = LineSink(), RuleTable()
    s = run_pipeline(ListSource(pkts), constant_model(1), events=events, rules=rules)
    assert s.drops == len(pkts) == len(events.lines)
    assert s.rules_created == 1
    (rule,) = rules.active.values()
    assert rule.src_ip == ENV_A.infected_host
    assert ENV_A.tunnel_domain.endswith(rule.apex)
    assert rules.sink.lines == [rule.render()]


def test_no_auto_block():
    pkts = generate_tunnel(ENV_A.with_mode("high"), 500)
    rules = RuleTable()
    s = run_pipeline(ListSource(pkts), constant_model(1), PipelineConfig(auto_block=False),
                     rules=rules)
    assert s.drops == len(pkts) and s.rules_created == 0 and not rules.active


def test_accept_emits_nothing():
    events = LineSink()
    s = run_pipeline(ListSource(generate_benign(ENV_A, 200)), constant_model(0), events=events)
    assert s.drops == 0 and events.lines == []


def test_event_lines(tmp_path):
    path = tmp_path / "events.jsonl"
    pkts = generate_tunnel(ENV_A.with_mode("high"), 200)
    run_pipeline(ListSource(pkts), constant_model(1), PipelineConfig(event_sink=str(path)))
    lines = path.read_text().splitlines()
    assert len(lines) == len(pkts)
    ev = SecurityEvent.from_line(lines[0])
    assert ev.action == DROP and ev.score == 1.0 and ev.src_ip == ENV_A.infected_host


def test_thousand_events_round_trip():
    rng = np.random.default_rng(0)
    sink = LineSink()
    sent = [SecurityEvent(float(rng.uniform(0, 2e9)), "dns_tunneling", f"10.0.0.{i % 250}",
                          "10.0.0.1", f"x{i}.example", float(rng.random()), DROP, "rf")
            for i in range(1000)]
    for e in sent:
        emit_event(e, sink)
    text = "\n".join(sink.lines) + "\n"
    assert all(tuple(json.loads(x)) == EVENT_KEYS for x in sink.lines)
    assert read_events(text) == sent


def test_accept_event_refused():
    e = SecurityEvent(0.0, "dns_tunneling", "a", "b", "c", 0.1, "ACCEPT", "rf")
    with pytest.raises(ValueError):
        emit_event(e, LineSink())


def test_unwritable_sink(tmp_path):
    with pytest.raises(SinkWriteFailure):
        LineSink(tmp_path / "missing" / "events.jsonl")


def test_apply_and_revoke():
    t = RuleTable()
    r = t.new_rule("10.0.0.5", "evil.net", 0.0, 0)
    assert t.sink.lines[-1] == "drop udp from 10.0.0.5 to any port 53 match-suffix evil.net # rule 1"
    with pytest.raises(DuplicateRule):
        t.apply_rule(FirewallRule(7, "10.0.0.5", "evil.net", 0.0, 0))
    assert t.revoke_rule(r.rule_id) == "revoke 1"
    assert not t.active
    assert t.sink.lines == [r.render(), "revoke 1"]
    with pytest.raises(UnknownRule):
        t.revoke_rule(1)


def test_rule_without_apex_renders():
    assert FirewallRule(3, "1.2.3.4", None, 0.0, 0).render() == \
        "drop udp from 1.2.3.4 to any port 53 # rule 3"


def test_random_sequences_match_set_model():
    rng = np.random.default_rng(0)
    pairs = [(f"10.0.0.{i}", f"d{j}.net") for i in range(3) for j in range(3)]
    for _ in range(50):
        table = RuleTable()
        model: dict[int, tuple] = {}
        for _ in range(int(rng.integers(1, 40))):
            if model and rng.random() < 0.4:
                rid = int(rng.choice(sorted(model)))
                table.revoke_rule(rid)
                del model[rid]
            else:
                pair = pairs[int(rng.integers(len(pairs)))]
                if pair in model.values():
                    with pytest.raises(DuplicateRule):
                        table.new_rule(*pair, 0.0, 0)
                else:
                    rule = table.new_rule(*pair, 0.0, 0)
                    assert rule.rule_id not in model
                    model[rule.rule_id] = pair
        assert {rid: r.key for rid, r in table.active.items()} == model
        replayed = RuleTable.replay("\n".join(table.sink.lines))
        assert {rid: r.key for rid, r in replayed.active.items()} == model


def test_queue_never_exceeds_capacity(rf_env_a):
    pkts = random_query_packets(2000, seed=1)
    s = run_pipeline(ListSource(pkts), rf_env_a, PipelineConfig(queue_capacity=8))
    assert s.packets_seen == 2000
    assert 1 <= s.max_queue_depth <= 8


def test_producer_blocks_rather_than_drops():
    gate = threading.Event()
    yielded = []

    class GatedModel:
        schema = FeatureSchema.pruned()
        kind = "gated"

        def predict_one(self, x):
            gate.wait(10)
            return 0, 0.0

    def source():
        for p in random_query_packets(50, seed=2):
            yielded.append(p)
            yield p

    out = {}
    runner = threading.Thread(target=lambda: out.setdefault(
        "s", run_pipeline(source(), GatedModel(), PipelineConfig(queue_capacity=4))))
    runner.start()
    time.sleep(0.5)
    # one packet held by the worker, four queued, one in the producer's hand
    stalled = len(yielded)
    assert stalled <= 6
    time.sleep(0.3)
    assert len(yielded) == stalled
    gate.set()
    runner.join(10)
    assert out["s"].packets_seen == 50
    assert out["s"].max_queue_depth == 4


@pytest.mark.parametrize("workers", [1, 3])
def test_every_packet_gets_one_verdict(rf_env_a, workers):
    pkts = random_query_packets(500, seed=3)
    s = run_pipeline(ListSource(pkts), rf_env_a, PipelineConfig(worker_count=workers))
    assert [r.index for r in s.records] == list(range(500))
    assert sum(s.histogram.counts) == 500


def test_single_worker_keeps_order():
    order = []

    class Recorder:
        schema = FeatureSchema.pruned()
        kind = "rec"

        def predict_one(self, x):
            order.append(x[0])
            return 0, 0.0

    pkts = random_query_packets(300, seed=4)
    run_pipeline(ListSource(pkts), Recorder())
    want = [extract_features(*dns_query_of(p)).ip_length for p in pkts]
    assert order == want


def test_schema_mismatch_at_startup(rf_env_a):
    with pytest.raises(SchemaFingerprintMismatch):
        run_pipeline(ListSource([]), rf_env_a, schema=FeatureSchema.full())


@pytest.mark.parametrize("bad", [0.0, 1.0, 1.1, -0.2])
def test_threshold_validated(bad):
    with pytest.raises(ValueError):
        PipelineConfig(score_threshold=bad)


def test_replay_source_reads_stream(env_a):
    pkts = env_a.packets[:50]
    assert list(PcapReplaySource(io.BytesIO(pcap_bytes(pkts)))) == pkts


def test_trivial_model_is_faster_than_forest(rf_env_a):
    pkts = random_query_packets(3000, seed=5)
    fast = bench_latency(constant_model(0, rf_env_a.schema), pkts)
    full = bench_latency(rf_env_a, pkts)
    assert fast.median_ns < full.median_ns
    assert "median_ns=" in full.render() and "p99_ns=" in full.render()
