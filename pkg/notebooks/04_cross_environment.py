"""
Moving the env_A model to env_B without retraining
==================================================

"""

from dnstun.dns_wire import dns_query_of
from dnstun.evaluation import evaluate, evaluate_cross_env, split_train_test
from dnstun.features import FeatureSchema, extract_features
from dnstun.model import Dataset, ForestParams, load_model, save_model, train_random_forest
from dnstun.synth import ENV_A, ENV_B, desk_environment


def dataset(profile):
    env = desk_environment(profile)
    rows = [(extract_features(*dns_query_of(p)), r.label) for p, r in zip(env.packets, env.manifest)]
    return Dataset.from_vectors(rows, FeatureSchema.pruned())


train, test = split_train_test(dataset(ENV_A), 0.85, seed=0)
rf = train_random_forest(train, ForestParams(seed=0))

# ship the model as text, as a router would receive it
shipped = load_model(save_model(rf))

print(evaluate(shipped, test).table("RF env_A"))
print(evaluate_cross_env(shipped, dataset(ENV_B)).table("RF env_B").splitlines()[-1])
