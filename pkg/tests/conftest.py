import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dnstun.dns_wire import dns_query_of  # noqa: E402
from dnstun.evaluation import split_train_test  # noqa: E402
from dnstun.features import FeatureSchema, extract_features  # noqa: E402
from dnstun.model import Dataset, ForestParams, train_random_forest  # noqa: E402
from dnstun.synth import ENV_A, ENV_B, desk_environment  # noqa: E402


RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])


def labelled_vectors(env):
    rows = []
    for pkt, rec in zip(env.packets, env.manifest):
        mq = dns_query_of(pkt)
        assert mq is not None
        rows.append((extract_features(*mq), rec.label))
    return rows


@pytest.fixture(scope="session")
def env_a():
    return desk_environment(ENV_A, 10_000, 10_000)


@pytest.fixture(scope="session")
def env_b():
    return desk_environment(ENV_B, 10_000, 10_000)


@pytest.fixture(scope="session")
def env_a_rows(env_a):
    return labelled_vectors(env_a)


@pytest.fixture(scope="session")
def pruned_split(env_a_rows):
    data = Dataset.from_vectors(env_a_rows, FeatureSchema.pruned())
    return split_train_test(data, 0.85, seed=0)


@pytest.fixture(scope="session")
def rf_env_a(pruned_split):
    train, _ = pruned_split
    return train_random_forest(train, ForestParams(seed=0))


def dominant_dataset(n=400, seed=0, width=4):
    """Feature 0 alone decides the label; the rest is noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, width))
    y = (X[:, 0] > 0).astype(np.int64)
    names = FeatureSchema.full().names[:width]
    return Dataset(X, y, FeatureSchema.from_names(names))


@pytest.fixture
def small_forest():
    data = dominant_dataset(300, seed=3)
    return train_random_forest(data, ForestParams(n_trees=15, seed=11))
