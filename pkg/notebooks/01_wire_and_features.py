"""
From a DNS query on the wire to a feature vector
================================================

"""

import numpy as np

from dnstun.dns_wire import DnsQuery, build_udp_frame, dns_query_of, encode_dns_query
from dnstun.dns_wire import CapturedPacket
from dnstun.features import FEATURE_NAMES, FeatureSchema, apply_schema, extract_features

# a lookup a browser might make, and one a tunnel client might make
benign = DnsQuery.from_name("www.scholar.google.com", qtype=1, txn_id=0x1234)
tunnel = DnsQuery.from_name("00a1.q2VxZ3J0bHlfZXhmaWx0cmF0ZWRfZGF0YQ.exfil.example", qtype=16)

for q in (benign, tunnel):
    raw = encode_dns_query(q)
    frame = build_udp_frame("192.168.1.10", "192.168.1.1", 53000, 53, raw)
    meta, parsed = dns_query_of(CapturedPacket((0, 0), frame))
    fv = extract_features(meta, parsed)
    print(parsed.qname)
    for name in FEATURE_NAMES:
        print(f"  {name:<22}{getattr(fv, name):>10.3f}")

# the deployed model only sees 13 of the 16 columns
pruned = FeatureSchema.pruned()
print(pruned.width, pruned.fingerprint)
print(np.array(apply_schema(fv, pruned)))
