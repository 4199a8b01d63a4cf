"""
Training the three classifiers on env_A
=======================================

"""

from dnstun.dns_wire import dns_query_of
from dnstun.evaluation import cumulative_importance, evaluate, rank_features, split_train_test
from dnstun.features import FeatureSchema, extract_features
from dnstun.model import ForestParams, Dataset, train_decision_tree, train_knn, train_random_forest
from dnstun.synth import ENV_A, desk_environment

env = desk_environment(ENV_A)
rows = [(extract_features(*dns_query_of(p)), r.label) for p, r in zip(env.packets, env.manifest)]

# first pass on all 16 features, to see which ones carry the signal
full = Dataset.from_vectors(rows, FeatureSchema.full())
train, test = split_train_test(full, 0.85, seed=0)
rf = train_random_forest(train, ForestParams(seed=0))
for name, cum in cumulative_importance(rank_features(rf)):
    print(f"{name:<22}{cum:.3f}")

# the pruned schema drops upper_characters, subdomain_count and query_length.
# On this synthetic data upper_characters actually ranks first (base64url is
# mixed case, benign names are not), yet the 13 remaining columns still separate
# the classes almost perfectly.
data = Dataset.from_vectors(rows, FeatureSchema.pruned())
train, test = split_train_test(data, 0.85, seed=0)
models = {
    "Decision Tree": train_decision_tree(train),
    "RF": train_random_forest(train, ForestParams(seed=0)),
    "K-Nearest Neighbors": train_knn(train, k=5),
}
for label, model in models.items():
    print(evaluate(model, test).table(label).splitlines()[-1])
