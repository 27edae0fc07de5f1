"""Dataset loading, text embedding composition, and train/val/test splitting.

File formats (all UTF-8):
  edges:        TSV `source<TAB>target[<TAB>timestamp]`, `#` comment lines skipped
  node text:    TSV `node_id<TAB>channel<TAB>space-separated tokens`
  word vectors: text `token v1 v2 ... vL` per line
  features:     TSV `node_id<TAB>v1 v2 ... vL` (dense per-node vectors used
                directly as the text embedding, e.g. bag-of-words datasets)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import CitationGraph
from .seeding import substream

__all__ = [
    "ALLOWED_CHANNELS",
    "TokenizedDocument",
    "WordVectorTable",
    "EdgeList",
    "DatasetSplit",
    "load_edge_list",
    "load_node_text",
    "load_word_vectors",
    "load_node_features",
    "embed_text",
    "embed_documents",
    "split_edges",
]

ALLOWED_CHANNELS = ("title", "abstract", "claim")

SPLIT_NAMES = ("train", "validation", "test")


class CorpusFormatError(ValueError):
    """A dataset file violates its declared format."""


@dataclass(frozen=True)
class TokenizedDocument:
    """Pre-tokenized node text, one ordered token list per channel."""

    node_id: str
    channels: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if not self.node_id:
            raise ValueError("node_id must be nonempty")
        for name in self.channels:
            if name not in ALLOWED_CHANNELS:
                raise CorpusFormatError(
                    f"unknown text channel {name!r} for node {self.node_id!r}; allowed: {ALLOWED_CHANNELS}"
                )

    def tokens(self, channels) -> list[str]:
        """Concatenated token stream over the selected channels, in channel order."""
        out: list[str] = []
        for name in channels:
            if name not in ALLOWED_CHANNELS:
                raise CorpusFormatError(f"unknown text channel {name!r}; allowed: {ALLOWED_CHANNELS}")
            out.extend(self.channels.get(name, ()))
        return out


@dataclass(frozen=True)
class WordVectorTable:
    """Pretrained token vectors of a single fixed dimension."""

    dimension: int
    vectors: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError("word vector dimension must be positive")

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str):
        return self.vectors.get(token)


@dataclass(frozen=True)
class EdgeList:
    """Parsed edge file plus the counts of rows dropped during cleaning."""

    edges: list[tuple]
    duplicate_count: int
    self_loop_count: int


def load_edge_list(path) -> EdgeList:
    """Parse a TSV edge list; dedup and drop self-loops, reporting counts.

    Edges come back in file order; direction is source-cites-target.
    """
    edges: list[tuple] = []
    seen: set[tuple] = set()
    duplicates = 0
    self_loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise CorpusFormatError(f"{path}: line {lineno}: expected 2 or 3 tab-separated fields, got {len(fields)}")
            src, dst = fields[0], fields[1]
            if not src or not dst:
                raise CorpusFormatError(f"{path}: line {lineno}: empty node id")
            if len(fields) == 3:
                try:
                    time = int(fields[2])
                except ValueError:
                    raise CorpusFormatError(f"{path}: line {lineno}: timestamp {fields[2]!r} is not an integer") from None
                edge = (src, dst, time)
            else:
                edge = (src, dst)
            if src == dst:
                self_loops += 1
                continue
            key = (src, dst)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            edges.append(edge)
    if not edges and duplicates == 0 and self_loops == 0:
        raise CorpusFormatError(f"{path}: empty edge file")
    return EdgeList(edges=edges, duplicate_count=duplicates, self_loop_count=self_loops)


def load_node_text(path) -> dict[str, TokenizedDocument]:
    """Parse the node-text TSV into one TokenizedDocument per node."""
    channels_by_node: dict[str, dict[str, tuple[str, ...]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise CorpusFormatError(f"{path}: line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
            node_id, channel, text = fields
            if channel not in ALLOWED_CHANNELS:
                raise CorpusFormatError(f"{path}: line {lineno}: unknown channel {channel!r}; allowed: {ALLOWED_CHANNELS}")
            per_node = channels_by_node.setdefault(node_id, {})
            if channel in per_node:
                raise CorpusFormatError(f"{path}: line {lineno}: duplicate channel {channel!r} for node {node_id!r}")
            per_node[channel] = tuple(text.split())
    return {nid: TokenizedDocument(node_id=nid, channels=chans) for nid, chans in channels_by_node.items()}


def load_word_vectors(path) -> WordVectorTable:
    """Parse whitespace-separated pretrained vectors; dimension inferred from line 1."""
    vectors: dict[str, np.ndarray] = {}
    dimension = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dimension is None:
                if not values:
                    raise CorpusFormatError(f"{path}: line {lineno}: no vector components")
                dimension = len(values)
            if len(values) != dimension:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: expected {dimension} components, got {len(values)}"
                )
            try:
                vec = np.asarray([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise CorpusFormatError(f"{path}: line {lineno}: non-numeric vector component") from None
            if token not in vectors:  # first occurrence wins
                vectors[token] = vec
    if dimension is None:
        raise CorpusFormatError(f"{path}: empty word vector file")
    return WordVectorTable(dimension=dimension, vectors=vectors)


def load_node_features(path) -> dict[str, np.ndarray]:
    """Parse dense per-node feature vectors (one `node_id<TAB>v1 v2 ...` row each)."""
    features: dict[str, np.ndarray] = {}
    dimension = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise CorpusFormatError(f"{path}: line {lineno}: expected `node_id<TAB>values`, got {len(fields)} fields")
            node_id, values = fields
            if node_id in features:
                raise CorpusFormatError(f"{path}: line {lineno}: duplicate node id {node_id!r}")
            try:
                vec = np.asarray([float(v) for v in values.split()], dtype=np.float64)
            except ValueError:
                raise CorpusFormatError(f"{path}: line {lineno}: non-numeric feature component") from None
            if dimension is None:
                dimension = len(vec)
            elif len(vec) != dimension:
                raise CorpusFormatError(f"{path}: line {lineno}: expected {dimension} components, got {len(vec)}")
            features[node_id] = vec
    if not features:
        raise CorpusFormatError(f"{path}: empty feature file")
    return features


def embed_text(doc: TokenizedDocument, channels, table: WordVectorTable):
    """Mean word vector over the selected channels' concatenated token stream.

    Out-of-vocabulary tokens are skipped (they do not enter the denominator);
    a document with no in-vocabulary tokens embeds to the all-zero vector.
    Returns (vector, oov_ratio).
    """
    channels = tuple(channels)
    if not channels:
        raise ValueError("channel selection must be nonempty")
    tokens = doc.tokens(channels)
    if not tokens:
        return np.zeros(table.dimension), 0.0
    hits = [table.vectors[t] for t in tokens if t in table.vectors]
    oov_ratio = 1.0 - len(hits) / len(tokens)
    if not hits:
        return np.zeros(table.dimension), 1.0
    return np.mean(hits, axis=0), oov_ratio


def embed_documents(docs, node_ids, channels, table):
    """Stack per-node text embeddings into an (N, L_t) matrix, in node order.

    Nodes without a document embed to zero. Returns (matrix, stats) where
    stats reports mean OOV ratio and how many nodes had no usable text.
    """
    matrix = np.zeros((len(node_ids), table.dimension))
    oov_ratios = []
    missing = 0
    for row, nid in enumerate(node_ids):
        doc = docs.get(nid)
        if doc is None:
            missing += 1
            continue
        vec, oov = embed_text(doc, channels, table)
        matrix[row] = vec
        oov_ratios.append(oov)
    stats = {
        "nodes_without_text": missing,
        "mean_oov_ratio": float(np.mean(oov_ratios)) if oov_ratios else 0.0,
    }
    return matrix, stats


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/validation/test edge partition plus sampled non-edges.

    Edges and negatives are dense-index pairs of the originating graph.
    Construction is a pure function of (graph, ratios, negatives, seed).
    """

    train_edges: tuple
    validation_edges: tuple
    test_edges: tuple
    negatives: dict[str, tuple]
    seed: int

    def edges_of(self, name: str) -> tuple:
        if name == "train":
            return self.train_edges
        if name == "validation":
            return self.validation_edges
        if name == "test":
            return self.test_edges
        raise KeyError(f"unknown split {name!r}")

    def validate(self, graph: CitationGraph) -> None:
        parts = [set(self.train_edges), set(self.validation_edges), set(self.test_edges)]
        union = parts[0] | parts[1] | parts[2]
        if union != graph.edge_set:
            raise ValueError("split parts do not reassemble the full edge set")
        if len(self.train_edges) + len(self.validation_edges) + len(self.test_edges) != graph.num_edges:
            raise ValueError("split parts overlap")
        for name, negs in self.negatives.items():
            for i, j in negs:
                if i == j:
                    raise ValueError(f"negative self-loop in split {name!r}")
                if (i, j) in graph.edge_set:
                    raise ValueError(f"negative pair {(i, j)} is an actual edge (split {name!r})")

    def to_dict(self, graph: CitationGraph) -> dict:
        ids = graph.node_ids

        def as_ids(pairs):
            return [[ids[i], ids[j]] for i, j in pairs]

        return {
            "seed": self.seed,
            "train": as_ids(self.train_edges),
            "validation": as_ids(self.validation_edges),
            "test": as_ids(self.test_edges),
            "negatives": {name: as_ids(p) for name, p in self.negatives.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict, graph: CitationGraph) -> "DatasetSplit":
        def as_indices(pairs):
            return tuple((graph.index_of(a), graph.index_of(b)) for a, b in pairs)

        return cls(
            train_edges=as_indices(payload["train"]),
            validation_edges=as_indices(payload["validation"]),
            test_edges=as_indices(payload["test"]),
            negatives={name: as_indices(p) for name, p in payload["negatives"].items()},
            seed=int(payload["seed"]),
        )


def _largest_remainder_counts(total: int, ratios) -> list[int]:
    quotas = [r * total for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    remainder = total - sum(counts)
    by_fraction = sorted(range(len(ratios)), key=lambda idx: (-(quotas[idx] - counts[idx]), idx))
    for idx in by_fraction[:remainder]:
        counts[idx] += 1
    return counts


def split_edges(graph: CitationGraph, ratios, negatives_per_positive: int, seed: int) -> DatasetSplit:
    """Uniform random edge partition plus uniform non-edge negatives, seeded.

    Split sizes follow the largest-remainder rule. Negatives are
    rejection-sampled without replacement within each split and never collide
    with any edge of the full graph or with the diagonal.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three nonnegative reals")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1 (got {sum(ratios)})")
    if graph.num_edges < 10:
        raise ValueError(f"graph has {graph.num_edges} edges; need at least 10 to split")
    if negatives_per_positive < 1:
        raise ValueError("negatives_per_positive must be a positive integer")

    m = graph.num_edges
    counts = _largest_remainder_counts(m, ratios)

    rng = substream(seed, "split")
    order = rng.permutation(m)
    all_edges = [tuple(e) for e in graph.edge_array]
    bounds = np.cumsum([0] + counts)
    parts = [
        tuple(all_edges[k] for k in order[bounds[s]:bounds[s + 1]])
        for s in range(3)
    ]

    n = graph.num_nodes
    available_non_edges = n * (n - 1) - m
    neg_rng = substream(seed, "negatives")
    negatives: dict[str, tuple] = {}
    for name, part in zip(SPLIT_NAMES, parts):
        want = negatives_per_positive * len(part)
        if want > available_non_edges:
            raise ValueError(
                f"requested {want} negatives for split {name!r} but only {available_non_edges} non-edges exist"
            )
        chosen: list[tuple[int, int]] = []
        chosen_set: set[tuple[int, int]] = set()
        while len(chosen) < want:
            i = int(neg_rng.integers(n))
            j = int(neg_rng.integers(n))
            pair = (i, j)
            if i == j or pair in graph.edge_set or pair in chosen_set:
                continue
            chosen.append(pair)
            chosen_set.add(pair)
        negatives[name] = tuple(chosen)

    split = DatasetSplit(
        train_edges=parts[0],
        validation_edges=parts[1],
        test_edges=parts[2],
        negatives=negatives,
        seed=seed,
    )
    split.validate(graph)
    return split
