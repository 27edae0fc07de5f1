"""Command-line pipeline: ingest -> train -> evaluate / predict / explain.

Every command resolves its configuration before any compute starts
(defaults < `--config key=value file` < explicit flags; the root seed may
also come from $ASPECTCITE_SEED), echoes the resolved configuration next to
its outputs, and writes all artifacts atomically (temp file + rename) under
`--out-dir`. Outputs are byte-reproducible for a fixed seed; wall-clock
readings live only under the report's `timing` key.

Exit codes: 0 success, 1 usage, 2 data/schema, 3 domain (e.g. unknown node),
4 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import corpus
from .explain import explain_target, export_explanation
from .graph import build_graph
from .metrics import evaluate
from .model import load_checkpoint, save_checkpoint, scores_for_pairs
from .propagation import load_state, save_state
from .training import TrainConfig, TrainingAbort, fit

__all__ = ["main", "entrypoint"]

SEED_ENV_VAR = "ASPECTCITE_SEED"


class UsageError(Exception):
    exit_code = 1


class DataError(Exception):
    exit_code = 2


class DomainError(Exception):
    exit_code = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); usage errors are exit 1 here
        raise UsageError(message)


def _atomic_write(path: str, data: str | bytes) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    tmp = f"{path}.tmp"
    with open(tmp, mode, encoding=None if isinstance(data, bytes) else "utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _require_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise DataError(f"{what} not found: {path}")
    return path


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(_require_file(path, "config file"), encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}: line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


class _Resolver:
    """Defaults < config file < explicit CLI flag, with typed parsing."""

    def __init__(self, args: argparse.Namespace):
        self.file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
        self.args = args
        self.resolved: dict = {}

    def get(self, key: str, default, parse=None, flag: str | None = None):
        flag_value = getattr(self.args, (flag or key).replace("-", "_"), None)
        if flag_value is not None:
            value = flag_value
        elif key in self.file_values:
            raw = self.file_values[key]
            try:
                value = parse(raw) if parse else raw
            except ValueError as exc:
                raise DataError(f"config key {key!r}: {exc}") from exc
        else:
            value = default
        self.resolved[key] = value
        return value

    def seed(self, default: int = 0) -> int:
        if getattr(self.args, "seed", None) is not None:
            value = self.args.seed
        elif "seed" in self.file_values:
            value = int(self.file_values["seed"])
        elif os.environ.get(SEED_ENV_VAR):
            value = int(os.environ[SEED_ENV_VAR])
        else:
            value = default
        self.resolved["seed"] = value
        return value


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _out_dir(args) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _echo_config(out_dir: str, command: str, resolved: dict) -> None:
    _write_json(os.path.join(out_dir, f"{command}_config.json"), {"command": command, **resolved})


def _degree_histogram(degrees: np.ndarray) -> list:
    values, counts = np.unique(degrees, return_counts=True)
    return [[int(v), int(c)] for v, c in zip(values, counts)]


# ----------------------------------------------------------------- ingest

def cmd_ingest(args) -> int:
    res = _Resolver(args)
    out_dir = _out_dir(args)
    seed = res.seed()
    ratios = res.get("ratios", (0.8, 0.1, 0.1), parse=_parse_float_list)
    negatives = res.get("negatives_per_positive", 1, parse=int)
    channels = res.get("channels", ("title",), parse=lambda s: tuple(v for v in s.split(",") if v))

    edge_file = _require_file(args.edges, "edge list")
    try:
        edge_list = corpus.load_edge_list(edge_file)
        graph = build_graph(edge_list.edges)

        text_stats: dict = {}
        if args.node_features:
            features = corpus.load_node_features(_require_file(args.node_features, "node features"))
            dim = len(next(iter(features.values())))
            text_vectors = np.zeros((graph.num_nodes, dim))
            missing = 0
            for row, nid in enumerate(graph.node_ids):
                vec = features.get(nid)
                if vec is None:
                    missing += 1
                else:
                    text_vectors[row] = vec
            text_source = "features"
            text_stats = {"nodes_without_features": missing}
        elif args.node_text and args.word_vectors:
            docs = corpus.load_node_text(_require_file(args.node_text, "node text"))
            table = corpus.load_word_vectors(_require_file(args.word_vectors, "word vectors"))
            text_vectors, text_stats = corpus.embed_documents(docs, graph.node_ids, channels, table)
            text_source = "tokens"
        else:
            raise UsageError("provide either --node-features or both --node-text and --word-vectors")

        split = corpus.split_edges(graph, ratios, negatives, seed)
    except corpus.CorpusFormatError as exc:
        raise DataError(str(exc)) from exc

    vectors_file = "text_vectors.npy"
    buffer = _npy_bytes(text_vectors)
    _atomic_write(os.path.join(out_dir, vectors_file), buffer)

    manifest = {
        "format": "aspectcite-manifest-v1",
        "seed": seed,
        "channels": list(channels),
        "text_source": text_source,
        "text_dim": int(text_vectors.shape[1]),
        "text_vectors_file": vectors_file,
        "nodes": list(graph.node_ids),
        "edges": [
            [graph.node_ids[i], graph.node_ids[j]] + ([int(t)] if graph.timed else [])
            for (i, j), t in zip(
                graph.edge_array, graph.edge_times if graph.timed else [None] * graph.num_edges
            )
        ],
        "cleaning": {
            "duplicates_dropped": edge_list.duplicate_count,
            "self_loops_dropped": edge_list.self_loop_count,
        },
        "split": split.to_dict(graph),
        "stats": {
            "num_nodes": graph.num_nodes,
            "num_edges": graph.num_edges,
            "density": graph.density(),
            "in_degree_histogram": _degree_histogram(graph.in_degrees()),
            "out_degree_histogram": _degree_histogram(graph.out_degrees()),
            "text": text_stats,
        },
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    _echo_config(out_dir, "ingest", {**res.resolved, "edges": edge_file, "out_dir": out_dir})
    print(f"ingest: {graph.num_nodes} nodes, {graph.num_edges} edges -> {out_dir}/manifest.json")
    return 0


def _npy_bytes(array: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    np.save(buf, np.asarray(array, dtype=np.float64))
    return buf.getvalue()


def _load_manifest(path: str):
    with open(_require_file(path, "manifest"), encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "aspectcite-manifest-v1":
        raise DataError(f"{path}: not a recognized manifest (format={payload.get('format')!r})")
    try:
        graph = build_graph([tuple(e) for e in payload["edges"]])
        split = corpus.DatasetSplit.from_dict(payload["split"], graph)
        vectors_path = os.path.join(os.path.dirname(os.path.abspath(path)), payload["text_vectors_file"])
        text_vectors = np.load(_require_file(vectors_path, "text vector matrix"))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed manifest: {exc}") from exc
    if list(graph.node_ids) != payload["nodes"]:
        raise DataError(f"{path}: node order does not match its edge list")
    return payload, graph, split, text_vectors


# ------------------------------------------------------------------ train

def cmd_train(args) -> int:
    res = _Resolver(args)
    out_dir = _out_dir(args)
    manifest, graph, split, text_vectors = _load_manifest(args.manifest)

    variant = res.get("variant", "dp")
    if variant not in ("dp", "ndp"):
        raise UsageError(f"--variant must be dp or ndp, got {variant!r}")
    config = TrainConfig(
        aspects=res.get("aspects", 5, parse=int),
        struct_dim=res.get("struct_dim", 100, parse=int),
        margin_edge=res.get("margin_edge", 1.0, parse=float),
        margin_aspect=res.get("margin_aspect", 1.0, parse=float),
        learning_rate=res.get("learning_rate", 0.05, parse=float),
        momentum=res.get("momentum", 0.0, parse=float),
        epochs_per_phase=res.get("epochs_per_phase", 20, parse=int),
        alternations=res.get("alternations", 3, parse=int),
        batch_size=res.get("batch_size", 512, parse=int),
        negatives_per_positive=res.get("negatives_per_positive", 1, parse=int),
        gumbel_temperature=res.get("gumbel_temperature", 1.0, parse=float),
        aspect_loss_weight=res.get("aspect_loss_weight", 1.0, parse=float),
        dynamic_propagation=variant == "dp",
        snapshot_cutoffs=res.get("snapshot_cutoffs", (), parse=_parse_int_list),
        propagation_epsilon=res.get("propagation_epsilon", 1e-8, parse=float),
        propagation_max_steps=res.get("propagation_max_steps", 100, parse=int),
        seed=res.seed(default=manifest["seed"]),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    result = fit(graph, split, config, text_vectors)
    save_checkpoint(result.params, os.path.join(out_dir, "checkpoint.json"))
    save_state(result.state, os.path.join(out_dir, "state.json"))
    _write_json(os.path.join(out_dir, "report.json"), result.report)
    _echo_config(out_dir, "train", {**res.resolved, "manifest": args.manifest, "out_dir": out_dir})
    phases = sum(len(s["sy_phases"]) for s in result.report["stages"])
    print(f"train: variant={variant} scoring-phases={phases} -> {out_dir}/checkpoint.json")
    return 0


def _load_artifacts(args):
    manifest, graph, split, text_vectors = _load_manifest(args.manifest)
    try:
        params = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
        state = load_state(_require_file(args.state, "state"))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if params.num_nodes != graph.num_nodes or state.num_nodes != graph.num_nodes:
        raise DataError("checkpoint/state node count does not match the manifest graph")
    if params.dims.text_dim != text_vectors.shape[1]:
        raise DataError("checkpoint text dimension does not match the manifest's text vectors")
    return manifest, graph, split, text_vectors, params, state


# --------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    res = _Resolver(args)
    out_dir = _out_dir(args)
    manifest, graph, split, text_vectors, params, state = _load_artifacts(args)
    seed = res.seed(default=manifest["seed"])
    split_name = res.get("split", "test", flag="split_name")
    ks = res.get("ks", (1, 5, 10), parse=_parse_int_list)
    rank_negatives = res.get("rank_negatives", 50, parse=int)
    scorer = res.get("scorer", "total_impact")
    per_source = os.path.join(out_dir, "per_source.csv") if args.per_source_csv else None
    try:
        report = evaluate(
            params, state, split, graph, text_vectors,
            split_name=split_name, ks=ks,
            rank_negatives_per_source=rank_negatives, scorer=scorer, seed=seed,
            per_source_csv=per_source,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write_json(os.path.join(out_dir, "metrics.json"), report.to_dict())
    _echo_config(out_dir, "evaluate", {**res.resolved, "manifest": args.manifest, "out_dir": out_dir})
    print(f"evaluate: auc={report.auc:.4f} recall={report.recall:.4f} -> {out_dir}/metrics.json")
    return 0


# ---------------------------------------------------------------- predict

def cmd_predict(args) -> int:
    res = _Resolver(args)
    out_dir = _out_dir(args)
    _, graph, _, text_vectors, params, state = _load_artifacts(args)
    scorer = res.get("scorer", "total_impact")
    res.seed()

    pairs_file = _require_file(args.pairs, "pair list")
    pairs_ids: list[tuple[str, str]] = []
    with open(pairs_file, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise DataError(f"{pairs_file}: line {lineno}: expected source<TAB>target")
            pairs_ids.append((fields[0], fields[1]))
    if not pairs_ids:
        raise DataError(f"{pairs_file}: no pairs to score")
    try:
        index_pairs = np.asarray([(graph.index_of(a), graph.index_of(b)) for a, b in pairs_ids])
    except KeyError as exc:
        raise DomainError(str(exc)) from exc
    if np.any(index_pairs[:, 0] == index_pairs[:, 1]):
        raise DomainError("cannot score self-pairs")

    scores = scores_for_pairs(index_pairs, state.matrix, params, text_vectors, scorer=scorer)
    payload = {
        "scorer": scorer,
        "pairs": [[a, b, float(s)] for (a, b), s in zip(pairs_ids, scores)],
    }
    _write_json(os.path.join(out_dir, "predictions.json"), payload)
    _echo_config(out_dir, "predict", {**res.resolved, "pairs": pairs_file, "out_dir": out_dir})
    print(f"predict: scored {len(pairs_ids)} pairs -> {out_dir}/predictions.json")
    return 0


# ---------------------------------------------------------------- explain

def cmd_explain(args) -> int:
    res = _Resolver(args)
    out_dir = _out_dir(args)
    manifest, graph, _, text_vectors, params, state = _load_artifacts(args)
    top_n = res.get("top_n", 5, parse=int)
    top_m = res.get("top_m", 10, parse=int)
    fmt = res.get("format", "json", flag="format")
    res.seed(default=manifest["seed"])

    texts = None
    if args.node_text:
        try:
            docs = corpus.load_node_text(_require_file(args.node_text, "node text"))
        except corpus.CorpusFormatError as exc:
            raise DataError(str(exc)) from exc
        channels = manifest.get("channels", list(corpus.ALLOWED_CHANNELS))
        texts = {nid: doc.tokens([c for c in channels if c in doc.channels]) for nid, doc in docs.items()}

    try:
        graph.index_of(args.target)
    except KeyError as exc:
        raise DomainError(f"unknown target node: {args.target!r}") from exc
    explanation = explain_target(
        args.target, params, state, graph, text_vectors, texts=texts, top_n=top_n, top_m=top_m
    )
    out_path = os.path.join(out_dir, f"explanation.{fmt}")
    tmp_target = out_path + ".tmp"
    export_explanation(explanation, tmp_target, format=fmt)
    os.replace(tmp_target, out_path)
    _echo_config(out_dir, "explain", {**res.resolved, "target": args.target, "out_dir": out_dir})
    populated = sum(1 for group in explanation.aspects if group)
    print(f"explain: target={args.target} populated-aspects={populated} -> {out_path}")
    return 0


# ------------------------------------------------------------------ wiring

def _build_parser() -> _Parser:
    parser = _Parser(prog="aspectcite", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", required=True, help="directory for all output artifacts")
        p.add_argument("--config", help="flat key=value config file (flags override it)")
        p.add_argument("--seed", type=int, help=f"root seed (also ${SEED_ENV_VAR})")

    p = sub.add_parser("ingest", help="build graph, text embeddings, and split; write a dataset manifest")
    common(p)
    p.add_argument("--edges", required=True, help="TSV edge list: source<TAB>target[<TAB>timestamp]")
    p.add_argument("--node-text", help="TSV node text: node_id<TAB>channel<TAB>tokens")
    p.add_argument("--word-vectors", help="pretrained word vector text file")
    p.add_argument("--node-features", help="TSV dense node features used directly as text embeddings")
    p.add_argument(
        "--channels", type=lambda s: tuple(v for v in s.split(",") if v),
        help="comma-separated channel subset (default: title)",
    )
    p.add_argument("--ratios", type=_parse_float_list, help="train,validation,test ratios (default 0.8,0.1,0.1)")
    p.add_argument("--negatives-per-positive", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="run the alternating optimization and write checkpoint/state/report")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--variant", choices=("dp", "ndp"))
    p.add_argument("--aspects", type=int)
    p.add_argument("--struct-dim", type=int)
    p.add_argument("--margin-edge", type=float)
    p.add_argument("--margin-aspect", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--epochs-per-phase", type=int)
    p.add_argument("--alternations", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--gumbel-temperature", type=float)
    p.add_argument("--aspect-loss-weight", type=float)
    p.add_argument("--snapshot-cutoffs", type=_parse_int_list)
    p.add_argument("--propagation-epsilon", type=float)
    p.add_argument("--propagation-max-steps", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a held-out split and write the metrics report")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--split", dest="split_name", choices=("train", "validation", "test"))
    p.add_argument("--ks", type=_parse_int_list)
    p.add_argument("--rank-negatives", type=int)
    p.add_argument("--scorer", choices=("total_impact", "masked_impact"))
    p.add_argument("--per-source-csv", action="store_true", help="also write per-source ranking metrics as CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="score arbitrary node pairs from a TSV")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--pairs", required=True, help="TSV of source<TAB>target pairs")
    p.add_argument("--scorer", choices=("total_impact", "masked_impact"))
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="per-aspect citer ranking and term summary for a target node")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--top-n", type=int, help="citers per aspect (default 5)")
    p.add_argument("--top-m", type=int, help="summary terms per aspect (default 10)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--node-text", help="optional node text TSV for term summaries")
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except TrainingAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 4
    except (DataError, corpus.CorpusFormatError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
