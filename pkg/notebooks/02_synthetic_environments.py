"""
Two labelled capture environments
=================================

env_A looks like a smart-home network leaking data with base64url labels;
env_B is an office network with a base32hex tunnel under another apex.
"""

import numpy as np

from dnstun.dns_wire import dns_query_of
from dnstun.features import extract_features
from dnstun.synth import ENV_A, ENV_B, desk_environment

for profile in (ENV_A, ENV_B):
    env = desk_environment(profile, 10_000, 10_000)
    labels = np.array([r.label for r in env.manifest])
    modes = [r.mode for r in env.manifest if r.label]
    print(profile.env_name, len(env.packets), "packets,", labels.sum(), "tunnel",
          f"(high={modes.count('high')}, low={modes.count('low')})")

    ent = np.array([extract_features(*dns_query_of(p)).shannon_entropy for p in env.packets])
    print("  mean entropy benign %.2f  tunnel %.2f" % (ent[labels == 0].mean(), ent[labels == 1].mean()))

    first = [dns_query_of(p)[1].qname for p, r in zip(env.packets, env.manifest) if r.label][:3]
    print("  e.g.", *first, sep="\n    ")
