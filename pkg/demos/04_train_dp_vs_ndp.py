#!/usr/bin/env python3
"""Training both model variants on a synthetic attributed citation graph.

Generates a community-structured graph with community-correlated sparse text,
then fits the dynamic variant (alternating scoring and propagation phases)
and the non-dynamic variant (scoring only, uniform state) at equal budgets
and reports ranking metrics for both.
"""

import time

import numpy as np

from aspectcite import TrainConfig, build_graph, evaluate, fit, split_edges


def community_dataset(n=300, m=1200, communities=5, vocab_per_community=5, seed=0):
    rng = np.random.default_rng(seed)
    group = rng.integers(communities, size=n)
    edges = set()
    while len(edges) < m:
        a, b = int(rng.integers(n)), int(rng.integers(n))
        if a == b:
            continue
        if group[a] != group[b] and rng.random() < 0.92:
            continue
        edges.add((f"n{a}", f"n{b}"))
    graph = build_graph(sorted(edges))
    dim = communities * vocab_per_community + 10
    text = np.zeros((graph.num_nodes, dim))
    for row, nid in enumerate(graph.node_ids):
        c = int(group[int(nid[1:])])
        topic_words = rng.choice(np.arange(c * vocab_per_community, (c + 1) * vocab_per_community), size=3)
        noise_words = rng.integers(communities * vocab_per_community, dim, size=1)
        text[row, topic_words] = 1.0
        text[row, noise_words] = 1.0
    return graph, text


graph, text = community_dataset()
split = split_edges(graph, (0.8, 0.1, 0.1), negatives_per_positive=1, seed=1)
print(f"dataset: {graph.num_nodes} nodes, {graph.num_edges} edges, "
      f"{len(split.train_edges)} train / {len(split.test_edges)} test")

for dynamic in (True, False):
    label = "DP " if dynamic else "NDP"
    config = TrainConfig(
        aspects=5, struct_dim=16, epochs_per_phase=20, alternations=3,
        batch_size=128, dynamic_propagation=dynamic, seed=11,
    )
    started = time.perf_counter()
    result = fit(graph, split, config, text)
    metrics = evaluate(result.params, result.state, split, graph, text, rank_negatives_per_source=20, seed=11)
    stage = result.report["stages"][0]
    losses = stage["sy_phases"][-1]["train_loss"]
    print(
        f"{label}: AUC {metrics.auc:.4f}  AP@10 {metrics.ap_at_k[10]:.4f}  "
        f"recall {metrics.recall:.4f}  final train loss {losses[-1]:.3f}  "
        f"propagation phases {len(stage['sd_phases'])}  ({time.perf_counter()-started:.1f}s)"
    )

print(
    "\nnote: how much the propagated influence states help depends on whether"
    "\n'cites influential work' predicts citedness in the data; on small synthetic"
    "\ngraphs the two variants often land within noise of each other."
)
