import dataclasses
import math

import numpy as np
import pytest

from dnstun.dns_wire import decode_dns_query, dns_query_of, extract_dns_packets, parse_udp_frame
from dnstun.synth import (ENV_A, ENV_B, LabelRecord, PayloadTooSmall, SynthError, SynthProfile,
                          TunnelSession, build_environment, csv_to_manifest, generate_benign,
                          generate_tunnel, manifest_to_csv, payload_from_qname, sessions_for_bytes)


def qnames(packets):
    return [q.qname for _, q in extract_dns_packets(packets)]


def wire_len(labels):
    return sum(len(x) + 1 for x in labels) + 1


def test_zero_benign():
    assert generate_benign(ENV_A, 0) == []


def test_weighted_domain_ratio():
    prof = dataclasses.replace(ENV_A, benign_domains=(("heavy.com", 9.0), ("light.org", 1.0)),
                               benign_qtype_mix=(("A", 1.0),))
    names = qnames(generate_benign(prof, 1000))
    heavy = sum(n.endswith("heavy.com") for n in names) / len(names)
    assert abs(heavy - 0.9) <= 0.05


def test_benign_parses_back():
    pkts = generate_benign(ENV_B, 500)
    assert len(extract_dns_packets(pkts)) == 500
    ts = [p.timestamp for p in pkts]
    assert ts == sorted(ts)


def test_one_byte_low_mode():
    prof = ENV_A.with_mode("low")
    pkts = generate_tunnel(prof, 1, payload=b"\x7f")
    assert len(pkts) == 1
    labels = decode_dns_query(parse_udp_frame(pkts[0])[1]).labels
    assert len(labels[0]) == 4 and int(labels[0], 16) >= 0
    assert payload_from_qname(prof, ".".join(labels)) == b"\x7f"


def _labels_per_query_oracle(label_len, apex):
    """Largest k such that counter + k full labels + apex fit in 255 wire bytes."""
    k = 0
    while wire_len(["abcd"] + ["x" * label_len] * (k + 1) + apex.split(".")) <= 255:
        k += 1
    return k


def test_1200_byte_chunk_count():
    prof = ENV_A.with_mode("high")
    k = _labels_per_query_oracle(32, prof.tunnel_domain)
    want = math.ceil(1200 * 4 / 3 / (32 * k))
    assert len(generate_tunnel(prof, 1200)) == want


def test_base32_profile_chunk_count():
    prof = ENV_B.with_mode("high")
    k = _labels_per_query_oracle(48, prof.tunnel_domain)
    per_query = 48 * k * 5 // 8
    assert len(generate_tunnel(prof, 5000)) == math.ceil(5000 / per_query)


@pytest.mark.parametrize("mode", ["low", "high"])
@pytest.mark.parametrize("prof", [ENV_A, ENV_B], ids=["A", "B"])
def test_payload_reconstructs(prof, mode):
    prof = prof.with_mode(mode)
    payload = np.random.default_rng(5).bytes(777)
    pkts = generate_tunnel(prof, len(payload), payload=payload)
    names = qnames(pkts)
    assert len(names) == len(pkts)
    assert b"".join(payload_from_qname(prof, n) for n in names) == payload
    counters = [int(n.split(".")[0], 16) for n in names]
    assert all((b - a) % 0x10000 == 1 for a, b in zip(counters, counters[1:]))
    assert {q.qtype for _, q in extract_dns_packets(pkts)} <= {1, 5, 10, 16}


def test_mode_timing():
    hi = generate_tunnel(ENV_A.with_mode("high"), 3000)
    lo = generate_tunnel(ENV_A.with_mode("low"), 60)
    def gaps(pkts):
        t = [s + u / 1e6 for s, u in (p.timestamp for p in pkts)]
        return np.diff(t)
    assert gaps(hi).max() <= 0.005 + 1e-6
    assert gaps(lo).min() >= 1.0 - 1e-6


def test_empty_payload_rejected():
    with pytest.raises(PayloadTooSmall):
        generate_tunnel(ENV_A, 0)
    with pytest.raises(PayloadTooSmall):
        generate_tunnel(ENV_A, 5, payload=b"")


@pytest.mark.parametrize("prof", [ENV_A, ENV_B], ids=["A", "B"])
def test_names_within_limits_for_all_sizes(prof):
    rng = np.random.default_rng(0)
    hi = prof.with_mode("high")
    for size in range(1, 4097, 37):
        for _, q in extract_dns_packets(generate_tunnel(hi, size, rng=rng)):
            assert max(map(len, q.labels)) <= 63
            assert wire_len(q.labels) <= 255
    for size in (1, 2, 63, 64, 4095, 4096):
        for _, q in extract_dns_packets(generate_tunnel(hi, size, rng=rng)):
            assert wire_len(q.labels) <= 255


def test_environment_without_tunnels():
    env = build_environment(ENV_A, 100)
    assert len(env.packets) == 100
    assert [r.label for r in env.manifest] == [0] * 100


def test_environment_is_deterministic():
    sessions = [TunnelSession("high", 900), TunnelSession("low", 40)]
    a = build_environment(ENV_B, 300, sessions)
    b = build_environment(ENV_B, 300, sessions)
    assert a.pcap() == b.pcap()
    assert a.manifest_csv() == b.manifest_csv()


def test_desk_scale(env_a):
    labels = [r.label for r in env_a.manifest]
    assert labels.count(0) == 10_000
    assert 9_500 <= labels.count(1) <= 10_500
    assert {r.mode for r in env_a.manifest if r.label} == {"low", "high"}
    assert all(dns_query_of(p) is not None for p in env_a.packets)


def test_profiles_use_distinct_apexes():
    assert not ENV_A.tunnel_domain.endswith(ENV_B.tunnel_domain)
    assert not ENV_B.tunnel_domain.endswith(ENV_A.tunnel_domain)
    assert ENV_A.tunnel_encoding != ENV_B.tunnel_encoding


def test_tunnel_entropy_above_benign(env_a_rows):
    ent = {0: [], 1: []}
    for v, label in env_a_rows:
        ent[label].append(v.shannon_entropy)
    assert np.mean(ent[1]) > np.mean(ent[0])


def test_manifest_round_trip_and_validation():
    recs = [LabelRecord(i, i % 2, "env_A", "high" if i % 2 else "benign") for i in range(20)]
    assert csv_to_manifest(manifest_to_csv(recs)) == recs
    assert csv_to_manifest(manifest_to_csv([])) == []
    bad = manifest_to_csv([LabelRecord(3, 0, "e", "benign"), LabelRecord(3, 1, "e", "low")])
    with pytest.raises(SynthError):
        csv_to_manifest(bad)
    with pytest.raises(SynthError):
        csv_to_manifest("index,label\n")


def test_profile_json_round_trip():
    for prof in (ENV_A, ENV_B):
        assert SynthProfile.from_json(prof.to_json()) == prof
    with pytest.raises(SynthError):
        SynthProfile.from_json('{"nonsense": 1}')
    with pytest.raises(SynthError):
        dataclasses.replace(ENV_A, tunnel_label_len=70)


def test_sessions_for_bytes():
    for mode in ("low", "high", "mixed"):
        s = sessions_for_bytes(10_000, mode, ENV_A)
        assert sum(x.payload_bytes for x in s) == 10_000
    mixed = sessions_for_bytes(10_000, "mixed", ENV_A)
    assert sum(x.payload_bytes for x in mixed if x.mode == "low") == 500
    assert sessions_for_bytes(0, "high", ENV_A) == []
