"""Shared fixtures: tiny graphs and synthetic attributed citation datasets."""

import numpy as np
import pytest

from aspectcite import build_graph, split_edges


@pytest.fixture
def small_graph():
    """20 nodes, 40 random edges; sparse enough for negative sampling."""
    rng = np.random.default_rng(5)
    edges = set()
    while len(edges) < 40:
        a, b = rng.integers(20, size=2)
        if a != b:
            edges.add((f"n{a}", f"n{b}"))
    return build_graph(sorted(edges))


@pytest.fixture
def small_split(small_graph):
    return split_edges(small_graph, (0.8, 0.1, 0.1), 1, seed=7)


@pytest.fixture
def small_text(small_graph):
    return np.random.default_rng(0).normal(size=(small_graph.num_nodes, 6))


def community_dataset(n=200, m=800, k=4, feat=24, seed=0, homophily=0.92):
    """Citation graph with k communities and community-correlated sparse text."""
    rng = np.random.default_rng(seed)
    group = rng.integers(k, size=n)
    edges = set()
    while len(edges) < m:
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        if group[a] != group[b] and rng.random() < homophily:
            continue
        edges.add((f"n{a}", f"n{b}"))
    graph = build_graph(sorted(edges))
    text = np.zeros((graph.num_nodes, feat))
    words_per_group = feat // (k + 1)
    for row, nid in enumerate(graph.node_ids):
        gk = int(group[int(nid[1:])])
        idx = rng.choice(np.arange(gk * words_per_group, (gk + 1) * words_per_group), size=3)
        text[row, idx] = 1.0
        text[row, rng.integers(k * words_per_group, feat, size=1)] = 1.0
    groups = {nid: int(group[int(nid[1:])]) for nid in graph.node_ids}
    return graph, text, groups
