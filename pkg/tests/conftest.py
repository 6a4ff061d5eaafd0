import numpy as np
import pytest

from gcnphr.graph import build_graph
from gcnphr.training import fixture_graph


def random_fixture(rng, n_users=4, n_videos=7, n_hashtags=5, max_tags=3, d_v=3):
    """Random small graph with some untagged uploads and possibly isolated hashtags."""
    uploads = [(int(rng.integers(n_users)), v) for v in range(n_videos)]
    triples = []
    for u, v in uploads:
        if rng.random() < 0.2:
            continue
        n = int(rng.integers(1, max_tags + 1))
        for h in rng.choice(n_hashtags, size=min(n, n_hashtags), replace=False):
            triples.append((u, v, int(h)))
    # occasional co-tagging of another user's video
    for _ in range(int(rng.integers(0, 4))):
        v = int(rng.integers(n_videos))
        triples.append((int(rng.integers(n_users)), v, int(rng.integers(n_hashtags))))
    g = build_graph(triples, uploads, n_users=n_users, n_hashtags=n_hashtags, n_videos=n_videos)
    feats = rng.normal(size=(n_videos, d_v))
    return g, feats, triples, uploads


@pytest.fixture
def fixture():
    return fixture_graph()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
