"""Ranking and classification metrics plus the end-to-end evaluation harness.

Conventions pinned here so numbers are comparable across runs:
  AUC     Mann-Whitney pair statistic, ties count 0.5.
  AP@k    mean precision over relevant ranks <= k, divided by
          min(k, total relevant); 0 when nothing relevant lands in the top k.
  nDCG@k  binary gains rel/log2(rank+1) against the ideal ordering.
  Recall  R-precision: classify the top-|positives| ranked pairs as positive
          (ties broken by stable input order, positives listed first).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import DatasetSplit
from .graph import CitationGraph
from .model import ModelParams, scores_for_pairs
from .seeding import substream

__all__ = [
    "MetricsReport",
    "auc",
    "average_precision_at_k",
    "ndcg_at_k",
    "recall",
    "evaluate",
]

RANK_KS = (1, 5, 10)

# Above this many pairwise comparisons AUC switches from exact pair counting
# to the mathematically identical rank-sum form.
_PAIRWISE_LIMIT = 20_000_000


def auc(pos_scores, neg_scores) -> float:
    """Probability a random positive outscores a random negative (ties 0.5)."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("auc needs at least one positive and one negative score")
    if pos.size * neg.size <= _PAIRWISE_LIMIT:
        wins = np.sum(pos[:, None] > neg[None, :])
        ties = np.sum(pos[:, None] == neg[None, :])
        return float((wins + 0.5 * ties) / (pos.size * neg.size))
    from scipy.stats import rankdata

    ranks = rankdata(np.concatenate([pos, neg]))
    rank_sum = ranks[: pos.size].sum()
    return float((rank_sum - pos.size * (pos.size + 1) / 2) / (pos.size * neg.size))


def average_precision_at_k(ranked_relevance, k: int) -> float:
    """Top-k average precision over a binary relevance list (best first)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = [int(bool(r)) for r in ranked_relevance]
    if not rel:
        raise ValueError("relevance list must be nonempty")
    total_relevant = sum(rel)
    if total_relevant == 0:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for position, flag in enumerate(rel[:k], start=1):
        if flag:
            hits += 1
            precision_sum += hits / position
    return precision_sum / min(k, total_relevant)


def ndcg_at_k(ranked_relevance, k: int) -> float:
    """Normalized discounted cumulative gain with binary relevance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = [int(bool(r)) for r in ranked_relevance]
    total_relevant = sum(rel)
    if total_relevant == 0:
        return 0.0
    dcg = 0.0
    for position, flag in enumerate(rel[:k], start=1):
        if flag:
            dcg += 1.0 / np.log2(position + 1)
    ideal = 0.0
    for position in range(1, min(k, total_relevant) + 1):
        ideal += 1.0 / np.log2(position + 1)
    return dcg / ideal


def recall(pos_scores, neg_scores) -> float:
    """R-precision recall: fraction of positives inside the top-|positives| cut."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("recall needs at least one positive and one negative score")
    scores = np.concatenate([pos, neg])
    order = np.argsort(-scores, kind="stable")
    cutoff = order[: pos.size]
    return float(np.sum(cutoff < pos.size) / pos.size)


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary; every metric lies in [0, 1]."""

    auc: float
    ap_at_k: dict[int, float]
    ndcg_at_k: dict[int, float]
    recall: float
    num_positives: int
    num_negatives: int
    num_ranked_sources: int
    config: dict = field(default_factory=dict)

    def validate(self) -> None:
        values = [self.auc, self.recall, *self.ap_at_k.values(), *self.ndcg_at_k.values()]
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise ValueError(f"metric outside [0, 1]: {self}")
        if 1 in self.ap_at_k and 1 in self.ndcg_at_k:
            if abs(self.ap_at_k[1] - self.ndcg_at_k[1]) > 1e-12:
                raise ValueError("AP@1 and nDCG@1 must coincide")

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "ap_at_k": {str(k): v for k, v in sorted(self.ap_at_k.items())},
            "ndcg_at_k": {str(k): v for k, v in sorted(self.ndcg_at_k.items())},
            "recall": self.recall,
            "num_positives": self.num_positives,
            "num_negatives": self.num_negatives,
            "num_ranked_sources": self.num_ranked_sources,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _sample_source_negatives(source, graph, count, rng):
    """Uniform non-neighbors of `source` (never edges, never self), distinct."""
    n = graph.num_nodes
    existing = set(graph.out_adjacency[source].tolist())
    max_available = n - 1 - len(existing)
    count = min(count, max_available)
    chosen: list[int] = []
    chosen_set: set[int] = set()
    while len(chosen) < count:
        cand = int(rng.integers(n))
        if cand == source or cand in existing or cand in chosen_set:
            continue
        chosen.append(cand)
        chosen_set.add(cand)
    return chosen


def evaluate(
    params: ModelParams,
    state,
    split: DatasetSplit,
    graph: CitationGraph,
    text_vectors: np.ndarray,
    split_name: str = "test",
    ks=RANK_KS,
    rank_negatives_per_source: int = 50,
    scorer: str = "total_impact",
    seed: int = 0,
    score_fn=None,
    per_source_csv=None,
) -> MetricsReport:
    """Score the held-out split and assemble the metric report.

    AUC and Recall are computed globally over the split's positives and its
    sampled negatives. AP@k and nDCG@k rank each source's candidate list (its
    held-out positives plus `rank_negatives_per_source` freshly sampled
    non-neighbors) and macro-average over sources with at least one positive.

    `score_fn(pairs) -> scores` overrides the model scorer (used by tests to
    substitute oracle scorers); the default scores with the trained model in
    deterministic infer mode. `per_source_csv`, when given, receives one row
    per ranked source for plotting.
    """
    positives = list(split.edges_of(split_name))
    negatives = list(split.negatives[split_name])
    if not positives:
        raise ValueError(f"split {split_name!r} has no positive edges to evaluate")
    if not negatives:
        raise ValueError(f"split {split_name!r} has no sampled negatives")

    state_matrix = state.matrix if hasattr(state, "matrix") else np.asarray(state)
    if score_fn is None:
        def score_fn(pairs):
            return scores_for_pairs(pairs, state_matrix, params, text_vectors, scorer=scorer)

    pos_scores = score_fn(np.asarray(positives))
    neg_scores = score_fn(np.asarray(negatives))

    by_source: dict[int, list[int]] = {}
    for i, j in positives:
        by_source.setdefault(i, []).append(j)

    rng = substream(seed, "rank-negatives")
    ap_totals = {k: 0.0 for k in ks}
    ndcg_totals = {k: 0.0 for k in ks}
    ranked_sources = 0
    per_source_rows = []
    for source in sorted(by_source):
        targets = by_source[source]
        neg_targets = _sample_source_negatives(source, graph, rank_negatives_per_source, rng)
        if not neg_targets:
            continue
        cand_pairs = np.asarray([(source, t) for t in targets + neg_targets])
        cand_scores = score_fn(cand_pairs)
        relevance = np.zeros(len(cand_pairs), dtype=int)
        relevance[: len(targets)] = 1
        order = np.argsort(-cand_scores, kind="stable")
        ranked_rel = relevance[order]
        ranked_sources += 1
        row = {"source": graph.node_ids[source], "positives": len(targets), "candidates": len(cand_pairs)}
        for k in ks:
            ap = average_precision_at_k(ranked_rel, k)
            ndcg = ndcg_at_k(ranked_rel, k)
            ap_totals[k] += ap
            ndcg_totals[k] += ndcg
            row[f"ap@{k}"] = ap
            row[f"ndcg@{k}"] = ndcg
        per_source_rows.append(row)

    if ranked_sources == 0:
        raise ValueError("no source had both positives and candidate negatives to rank")

    if per_source_csv is not None:
        import csv as _csv

        with open(per_source_csv, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(per_source_rows[0]))
            writer.writeheader()
            writer.writerows(per_source_rows)

    report = MetricsReport(
        auc=auc(pos_scores, neg_scores),
        ap_at_k={k: ap_totals[k] / ranked_sources for k in ks},
        ndcg_at_k={k: ndcg_totals[k] / ranked_sources for k in ks},
        recall=recall(pos_scores, neg_scores),
        num_positives=len(positives),
        num_negatives=len(negatives),
        num_ranked_sources=ranked_sources,
        config={
            "split": split_name,
            "ks": list(ks),
            "rank_negatives_per_source": rank_negatives_per_source,
            "scorer": scorer,
            "seed": seed,
        },
    )
    report.validate()
    return report
