"""Alternating optimization of the two coupled systems.

The scoring system fits the learnable tensors to margin losses over sampled
triplets (source, cited, non-cited) while the influence states stay fixed;
the propagation system then recomputes per-edge masked impacts with the
updated tensors and re-propagates influence to its fixed point. The two
phases alternate a configurable number of times; the non-dynamic variant
skips propagation and keeps the uniform initial state throughout.

Batch updates sum per-triplet gradients (per-sample SGD, vectorized), so the
learning rate is per sampled triplet and independent of batch size. Reported
loss traces are per-triplet means.

All gradients are derived by hand (the chain is shallow) and verified
against central finite differences in the test suite with the aspect
selection frozen, matching the straight-through treatment: forward passes
use the hard Gumbel-max sample, backward passes hold it constant.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .corpus import DatasetSplit
from .graph import CitationGraph
from .model import Dims, ModelParams, softmax
from .propagation import (
    AspectState,
    build_projection,
    build_transition,
    initialize_state,
    propagate,
)
from .seeding import substream

__all__ = [
    "TrainConfig",
    "Triplet",
    "TrainingAbort",
    "FitResult",
    "loss_edge",
    "loss_aspect",
    "sample_triplets",
    "batch_loss_and_grads",
    "batch_loss",
    "sample_batch_alphas",
    "infer_batch_alphas",
    "train_sy_phase",
    "train_sd_phase",
    "fit",
]


class TrainingAbort(RuntimeError):
    """Raised when the loss turns non-finite; carries diagnostics."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything the alternating optimization needs, with desk-scale defaults."""

    aspects: int = 5
    struct_dim: int = 100
    margin_edge: float = 1.0
    margin_aspect: float = 1.0
    learning_rate: float = 0.05
    momentum: float = 0.0
    epochs_per_phase: int = 20
    alternations: int = 3
    batch_size: int = 512
    negatives_per_positive: int = 1
    gumbel_temperature: float = 1.0
    aspect_loss_weight: float = 1.0
    dynamic_propagation: bool = True
    snapshot_cutoffs: tuple = ()
    propagation_epsilon: float = 1e-8
    propagation_max_steps: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.aspects < 1 or self.struct_dim < 1:
            raise ValueError("aspects and struct_dim must be positive")
        if self.margin_edge <= 0 or self.margin_aspect <= 0:
            raise ValueError("margins must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs_per_phase < 1 or self.alternations < 1 or self.batch_size < 1:
            raise ValueError("epochs_per_phase, alternations, and batch_size must be >= 1")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if self.gumbel_temperature <= 0:
            raise ValueError("gumbel_temperature must be positive")
        if self.aspect_loss_weight < 0:
            raise ValueError("aspect_loss_weight must be nonnegative")
        if list(self.snapshot_cutoffs) != sorted(self.snapshot_cutoffs):
            raise ValueError("snapshot_cutoffs must be ordered ascending")

    def to_dict(self) -> dict:
        return {
            "aspects": self.aspects,
            "struct_dim": self.struct_dim,
            "margin_edge": self.margin_edge,
            "margin_aspect": self.margin_aspect,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "epochs_per_phase": self.epochs_per_phase,
            "alternations": self.alternations,
            "batch_size": self.batch_size,
            "negatives_per_positive": self.negatives_per_positive,
            "gumbel_temperature": self.gumbel_temperature,
            "aspect_loss_weight": self.aspect_loss_weight,
            "dynamic_propagation": self.dynamic_propagation,
            "snapshot_cutoffs": list(self.snapshot_cutoffs),
            "propagation_epsilon": self.propagation_epsilon,
            "propagation_max_steps": self.propagation_max_steps,
            "seed": self.seed,
        }


class Triplet(NamedTuple):
    source: int
    positive: int
    negative: int


def loss_edge(f_pos: float, f_neg: float, margin_edge: float) -> float:
    """Hinge on the link-score gap: max(0, margin - (f_pos - f_neg))."""
    return max(0.0, margin_edge - (f_pos - f_neg))


def loss_aspect(d_pos, d_neg, alpha, margin_aspect: float) -> float:
    """Hinge on the selected-aspect impact gap; alpha comes from the positive pair."""
    alpha = np.asarray(alpha)
    gap = float(alpha @ np.asarray(d_pos)) - float(alpha @ np.asarray(d_neg))
    return max(0.0, margin_aspect - gap)


class TripletBatch(list):
    """List of triplets plus the count of skipped exhausted sources."""

    skipped: int = 0


def sample_triplets(split: DatasetSplit, batch: int, rng: np.random.Generator, graph: CitationGraph, train_edges=None):
    """Draw `batch` (source, positive, negative) triplets.

    Positives come uniformly (with replacement) from the train edges;
    negatives are rejection-sampled uniformly over the source's non-neighbors.
    Sources with no non-neighbor are skipped (counted in the returned warning
    total, exposed via the .skipped attribute of the list-like result).
    """
    edges = list(train_edges) if train_edges is not None else list(split.train_edges)
    if not edges:
        raise ValueError("train edge set is empty")
    triplets: list[Triplet] = []
    skipped = 0
    n = graph.num_nodes
    while len(triplets) < batch:
        i, j = edges[int(rng.integers(len(edges)))]
        cited = graph.out_adjacency[i]
        if len(cited) >= n - 1:
            skipped += 1
            if skipped > 10 * batch:
                break  # every remaining source is exhausted; give up gracefully
            continue
        negative = None
        for _ in range(50):
            cand = int(rng.integers(n))
            if cand != i and (i, cand) not in graph.edge_set:
                negative = cand
                break
        if negative is None:
            allowed = sorted(set(range(n)) - {i} - set(cited.tolist()))
            negative = int(allowed[int(rng.integers(len(allowed)))])
        triplets.append(Triplet(i, j, negative))
    result = TripletBatch(triplets)
    result.skipped = skipped
    return result


def _forward(params: ModelParams, state_matrix, text_vectors, triplets):
    """Shared forward pass caching every intermediate the backward needs."""
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    bi, bj, bk = trip[:, 0], trip[:, 1], trip[:, 2]

    def rep(nodes):
        fused = np.concatenate([text_vectors[nodes], params.node_embeddings[nodes]], axis=1)
        norms = np.linalg.norm(fused, axis=1, keepdims=True)
        safe = np.where(norms == 0.0, 1.0, norms)
        return fused / safe, norms

    r_i, norm_i = rep(bi)
    r_j, norm_j = rep(bj)
    r_k, norm_k = rep(bk)

    state = np.asarray(state_matrix)
    d_j = state[bj]
    d_k = state[bk]
    c_j = d_j @ params.state_to_effect.T
    c_k = d_k @ params.state_to_effect.T
    e_j = r_i * r_j
    e_k = r_i * r_k
    imp_j = c_j @ params.effect_weights + e_j @ params.similarity_weights + params.bias
    imp_k = c_k @ params.effect_weights + e_k @ params.similarity_weights + params.bias
    f_j = c_j.sum(axis=1) + e_j.sum(axis=1)
    f_k = c_k.sum(axis=1) + e_k.sum(axis=1)
    return {
        "bi": bi, "bj": bj, "bk": bk,
        "r_i": r_i, "r_j": r_j, "r_k": r_k,
        "norm_i": norm_i, "norm_j": norm_j, "norm_k": norm_k,
        "d_j": d_j, "d_k": d_k,
        "c_j": c_j, "c_k": c_k,
        "e_j": e_j, "e_k": e_k,
        "imp_j": imp_j, "imp_k": imp_k,
        "f_j": f_j, "f_k": f_k,
    }


def sample_batch_alphas(impacts: np.ndarray, rng: np.random.Generator, temperature: float = 1.0):
    """Vectorized train-mode aspect sampling for a batch of impact rows.

    Returns (hard one-hot rows, tempered-softmax relaxation rows).
    """
    pi = softmax(impacts)
    u = rng.random(impacts.shape)
    perturbed = -np.log(-np.log(u)) + np.log(pi)
    hard = np.zeros_like(pi)
    hard[np.arange(len(pi)), np.argmax(perturbed, axis=1)] = 1.0
    relaxed = softmax(perturbed / temperature)
    return hard, relaxed


def infer_batch_alphas(impacts: np.ndarray) -> np.ndarray:
    """Deterministic argmax aspect selection (ties to the lowest index)."""
    hard = np.zeros_like(impacts)
    hard[np.arange(len(impacts)), np.argmax(impacts, axis=1)] = 1.0
    return hard


def batch_loss(params, state_matrix, text_vectors, triplets, alphas, config: TrainConfig) -> float:
    """Summed triplet loss with the aspect selection held fixed (forward only)."""
    fw = _forward(params, state_matrix, text_vectors, triplets)
    z_e = config.margin_edge - (fw["f_j"] - fw["f_k"])
    gap = (alphas * fw["imp_j"]).sum(axis=1) - (alphas * fw["imp_k"]).sum(axis=1)
    z_t = config.margin_aspect - gap
    per = np.maximum(z_e, 0.0) + config.aspect_loss_weight * np.maximum(z_t, 0.0)
    return float(per.sum())


def batch_loss_and_grads(params, state_matrix, text_vectors, triplets, alphas, config: TrainConfig):
    """Summed triplet loss and its hand-derived gradients for every tensor.

    Summing (rather than averaging) over the batch makes one update
    equivalent to per-triplet SGD at the configured learning rate; batching
    is purely a vectorization detail. The aspect selection `alphas` (one row
    per triplet, from the positive pair) is a constant of the backward pass.
    """
    fw = _forward(params, state_matrix, text_vectors, triplets)

    z_e = config.margin_edge - (fw["f_j"] - fw["f_k"])
    gap = (alphas * fw["imp_j"]).sum(axis=1) - (alphas * fw["imp_k"]).sum(axis=1)
    z_t = config.margin_aspect - gap
    loss = float((np.maximum(z_e, 0.0) + config.aspect_loss_weight * np.maximum(z_t, 0.0)).sum())

    active_e = (z_e > 0).astype(np.float64)
    active_t = (z_t > 0).astype(np.float64) * config.aspect_loss_weight

    g_f_j = -active_e
    g_f_k = active_e
    g_imp_j = -active_t[:, None] * alphas
    g_imp_k = active_t[:, None] * alphas

    grad_bias = (g_imp_j + g_imp_k).sum(axis=0)
    grad_effect_w = fw["c_j"].T @ g_imp_j + fw["c_k"].T @ g_imp_k
    grad_similarity_w = fw["e_j"].T @ g_imp_j + fw["e_k"].T @ g_imp_k

    g_c_j = g_imp_j @ params.effect_weights.T + g_f_j[:, None]
    g_c_k = g_imp_k @ params.effect_weights.T + g_f_k[:, None]
    g_e_j = g_imp_j @ params.similarity_weights.T + g_f_j[:, None]
    g_e_k = g_imp_k @ params.similarity_weights.T + g_f_k[:, None]

    grad_state_to_effect = g_c_j.T @ fw["d_j"] + g_c_k.T @ fw["d_k"]

    g_r_i = g_e_j * fw["r_j"] + g_e_k * fw["r_k"]
    g_r_j = g_e_j * fw["r_i"]
    g_r_k = g_e_k * fw["r_i"]

    text_dim = params.dims.text_dim

    def through_normalization(g_r, r, norms):
        inner = (g_r * r).sum(axis=1, keepdims=True)
        g_fused = np.where(norms == 0.0, 0.0, (g_r - inner * r) / np.where(norms == 0.0, 1.0, norms))
        return g_fused[:, text_dim:]

    grad_emb = np.zeros_like(params.node_embeddings)
    np.add.at(grad_emb, fw["bi"], through_normalization(g_r_i, fw["r_i"], fw["norm_i"]))
    np.add.at(grad_emb, fw["bj"], through_normalization(g_r_j, fw["r_j"], fw["norm_j"]))
    np.add.at(grad_emb, fw["bk"], through_normalization(g_r_k, fw["r_k"], fw["norm_k"]))

    grads = {
        "state_to_effect": grad_state_to_effect,
        "effect_weights": grad_effect_w,
        "similarity_weights": grad_similarity_w,
        "bias": grad_bias,
        "node_embeddings": grad_emb,
    }
    return loss, grads


def _apply_sgd(params: ModelParams, grads: dict, learning_rate: float, momentum: float = 0.0, velocity: dict | None = None) -> None:
    for name, grad in grads.items():
        tensor = getattr(params, name)
        if momentum > 0.0 and velocity is not None:
            velocity[name] = momentum * velocity.get(name, 0.0) + grad
            tensor -= learning_rate * velocity[name]
        else:
            tensor -= learning_rate * grad


def train_sy_phase(
    params: ModelParams,
    state: AspectState,
    split: DatasetSplit,
    config: TrainConfig,
    graph: CitationGraph,
    text_vectors: np.ndarray,
    rng_triplets: np.random.Generator,
    rng_gumbel: np.random.Generator,
    train_edges=None,
):
    """One scoring-system phase: SGD over sampled triplets, state held fixed.

    Returns (params, trace) where trace holds the per-epoch mean training
    loss, the loss on a fixed evaluation batch, and the skipped-source count.
    """
    config.validate()
    edges = list(train_edges) if train_edges is not None else list(split.train_edges)
    if not edges:
        raise ValueError("no train edges available for this phase")
    state_matrix = state.matrix

    eval_rng = substream(config.seed, "eval-batch")
    eval_batch = sample_triplets(split, min(config.batch_size, 4 * len(edges)), eval_rng, graph, train_edges=edges)
    eval_alphas = infer_batch_alphas(_forward(params, state_matrix, text_vectors, eval_batch)["imp_j"])

    batches_per_epoch = max(1, int(np.ceil(len(edges) / config.batch_size)))
    trace = {"train_loss": [], "eval_loss": [], "skipped_sources": 0}
    velocity: dict = {}  # momentum buffers live for the duration of the phase
    for _ in range(config.epochs_per_phase):
        epoch_losses = []
        for _ in range(batches_per_epoch):
            triplets = sample_triplets(split, config.batch_size, rng_triplets, graph, train_edges=edges)
            trace["skipped_sources"] += triplets.skipped
            if not triplets:
                continue
            fw_imp = _forward(params, state_matrix, text_vectors, triplets)["imp_j"]
            alphas, _ = sample_batch_alphas(fw_imp, rng_gumbel, config.gumbel_temperature)
            loss, grads = batch_loss_and_grads(params, state_matrix, text_vectors, triplets, alphas, config)
            if not np.isfinite(loss):
                norms = {name: float(np.linalg.norm(getattr(params, name))) for name in ModelParams.TENSOR_FIELDS}
                raise TrainingAbort(f"non-finite loss {loss}; parameter norms {norms}; first triplet {triplets[0]}")
            if config.learning_rate > 0.0:
                _apply_sgd(params, grads, config.learning_rate, config.momentum, velocity)
            epoch_losses.append(loss / len(triplets))
        trace["train_loss"].append(float(np.mean(epoch_losses)) if epoch_losses else 0.0)
        trace["eval_loss"].append(
            batch_loss(params, state_matrix, text_vectors, eval_batch, eval_alphas, config) / max(1, len(eval_batch))
        )
    return params, trace


def train_sd_phase(
    params: ModelParams,
    state: AspectState,
    train_edges,
    config: TrainConfig,
    text_vectors: np.ndarray,
) -> AspectState:
    """One propagation-system phase: rebuild edge impacts and re-propagate.

    Aspect selection is deterministic (infer mode) so the phase is a pure
    function of (params, state, edges).
    """
    params.validate()
    edges = np.asarray(list(train_edges), dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        raise ValueError("no train edges available for propagation")
    from .model import impacts_for_pairs

    _, _, impact_rows = impacts_for_pairs(edges, state.matrix, params, text_vectors)
    selected = np.argmax(impact_rows, axis=1)
    masked = np.zeros_like(impact_rows)
    masked[np.arange(len(impact_rows)), selected] = np.maximum(
        impact_rows[np.arange(len(impact_rows)), selected], 0.0
    )
    tensor = build_transition(edges, masked, params.num_nodes)
    op = build_projection(tensor)
    return propagate(op, state, max_steps=config.propagation_max_steps, epsilon=config.propagation_epsilon)


@dataclass
class FitResult:
    params: ModelParams
    state: AspectState
    report: dict


def fit(graph: CitationGraph, split: DatasetSplit, config: TrainConfig, text_vectors: np.ndarray) -> FitResult:
    """Run the full alternating schedule and assemble the training report.

    Dynamic variant: each alternation is a scoring phase followed by a
    propagation phase. Non-dynamic: the same number of scoring phases against
    the uniform initial state, no propagation. Under a snapshot schedule the
    whole alternation repeats per cumulative cutoff, parameters and state
    carrying forward.
    """
    config.validate()
    text_vectors = np.asarray(text_vectors, dtype=np.float64)
    if text_vectors.shape[0] != graph.num_nodes:
        raise ValueError(f"text matrix has {text_vectors.shape[0]} rows for {graph.num_nodes} nodes")

    dims = Dims(aspects=config.aspects, text_dim=text_vectors.shape[1], struct_dim=config.struct_dim)
    lineage = f"root-seed={config.seed}; streams=init,triplets,gumbel,eval-batch"
    params = ModelParams.initialize(dims, graph.num_nodes, substream(config.seed, "init"), seed_lineage=lineage)
    state = initialize_state(graph.num_nodes, config.aspects)

    rng_triplets = substream(config.seed, "triplets")
    rng_gumbel = substream(config.seed, "gumbel")

    if config.snapshot_cutoffs:
        if not graph.timed:
            raise ValueError("snapshot schedule requires a timed graph")
        time_of = {tuple(e): int(t) for e, t in zip(graph.edge_array, graph.edge_times)}
        stages = [
            (cutoff, [e for e in split.train_edges if time_of[e] <= cutoff])
            for cutoff in config.snapshot_cutoffs
        ]
    else:
        stages = [(None, list(split.train_edges))]

    report = {
        "config": config.to_dict(),
        "variant": "dp" if config.dynamic_propagation else "ndp",
        "stages": [],
        "timing": {},
    }
    started = time.perf_counter()
    for cutoff, active_edges in stages:
        stage_report = {"cutoff": cutoff, "num_train_edges": len(active_edges), "sy_phases": [], "sd_phases": []}
        if not active_edges:
            report["stages"].append(stage_report)
            continue
        for _ in range(config.alternations):
            params, trace = train_sy_phase(
                params, state, split, config, graph, text_vectors, rng_triplets, rng_gumbel, train_edges=active_edges
            )
            stage_report["sy_phases"].append(trace)
            if config.dynamic_propagation:
                state = train_sd_phase(params, state, active_edges, config, text_vectors)
                stage_report["sd_phases"].append(
                    {"steps": state.step, "residual": state.residual, "converged": state.converged}
                )
        report["stages"].append(stage_report)
    report["timing"]["fit_seconds"] = time.perf_counter() - started
    return FitResult(params=params, state=state, report=report)
