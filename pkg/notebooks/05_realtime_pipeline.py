"""
Replaying a capture through the inline detector
===============================================

Packets go through a bounded queue to a worker that filters, featurises,
scores and issues a verdict. Drops produce events and one firewall rule per
(source, apex) pair.
"""

from dnstun.dns_wire import dns_query_of
from dnstun.evaluation import split_train_test
from dnstun.features import FeatureSchema, extract_features
from dnstun.model import Dataset, ForestParams, train_random_forest
from dnstun.pipeline import (LineSink, PcapReplaySource, RuleTable, bench_latency,
                             random_query_packets, run_pipeline)
from dnstun.synth import ENV_A, ENV_B, desk_environment

env = desk_environment(ENV_A)
rows = [(extract_features(*dns_query_of(p)), r.label) for p, r in zip(env.packets, env.manifest)]
train, _ = split_train_test(Dataset.from_vectors(rows, FeatureSchema.pruned()), 0.85, seed=0)
rf = train_random_forest(train, ForestParams(seed=0))

events, rules = LineSink(), RuleTable()
summary = run_pipeline(PcapReplaySource(desk_environment(ENV_B).pcap()), rf,
                       events=events, rules=rules)
print(summary.render())
print(events.lines[0])
# false positives on env_B's benign traffic also earn rules; show a few
print(*rules.sink.lines[:5], sep="\n")
print(len(rules.active), "active rules")

# an operator reverts the first rule
print(rules.revoke_rule(1))

report = bench_latency(rf, random_query_packets(20_000))
print(report.render())
