#!/usr/bin/env python3
"""Download the public Cora citation dataset and stage it for the test suite.

Fetches the LINQS archive (cora.cites + cora.content), verifies the expected
sizes (2708 nodes, 5429 citation rows), places the raw files under
tests/data/cora/, and optionally converts them to this package's TSV formats
so the CLI pipeline can ingest them directly:

    python demos/fetch_cora.py            # stage raw files for pytest
    python demos/fetch_cora.py --make-tsv # also write edges.tsv/features.tsv

Needs network access; in an offline environment, obtain cora.cites and
cora.content elsewhere and drop them into tests/data/cora/ (or point
$CORA_DIR at them).
"""

import argparse
import io
import sys
import tarfile
import urllib.request
from pathlib import Path

URLS = [
    "https://linqs-data.soe.ucsc.edu/public/lbc/cora.tgz",
    "https://github.com/shchur/gnn-benchmark/raw/master/data/cora/cora.tgz",
]

REPO_ROOT = Path(__file__).resolve().parents[1]
DEFAULT_DIR = REPO_ROOT / "tests" / "data" / "cora"


def download() -> bytes:
    last_error = None
    for url in URLS:
        try:
            print(f"fetching {url} ...")
            with urllib.request.urlopen(url, timeout=60) as resp:
                return resp.read()
        except Exception as exc:  # noqa: BLE001 - report and try the next mirror
            print(f"  failed: {exc}")
            last_error = exc
    raise SystemExit(f"could not download Cora from any mirror: {last_error}")


def stage(dest: Path) -> None:
    payload = download()
    dest.mkdir(parents=True, exist_ok=True)
    with tarfile.open(fileobj=io.BytesIO(payload), mode="r:gz") as tar:
        for member in tar.getmembers():
            name = Path(member.name).name
            if name in ("cora.cites", "cora.content") and member.isfile():
                (dest / name).write_bytes(tar.extractfile(member).read())
    for required in ("cora.cites", "cora.content"):
        if not (dest / required).exists():
            raise SystemExit(f"archive did not contain {required}")
    n_nodes = sum(1 for _ in open(dest / "cora.content", encoding="utf-8"))
    n_edges = sum(1 for _ in open(dest / "cora.cites", encoding="utf-8"))
    print(f"staged {dest}: {n_nodes} content rows, {n_edges} citation rows")
    if (n_nodes, n_edges) != (2708, 5429):
        print("warning: sizes differ from the published 2708/5429")


def make_tsv(dest: Path) -> None:
    """Convert to the package's ingest formats.

    cora.cites rows are `cited citing`; our edge rows are `citing<TAB>cited`.
    cora.content rows are `id <1433 binary features> label`; the label is
    dropped and the features become the dense per-node text embedding.
    """
    edges_out = dest / "edges.tsv"
    with open(dest / "cora.cites", encoding="utf-8") as fh, open(edges_out, "w", encoding="utf-8") as out:
        for line in fh:
            cited, citing = line.split()
            out.write(f"{citing}\t{cited}\n")
    features_out = dest / "features.tsv"
    with open(dest / "cora.content", encoding="utf-8") as fh, open(features_out, "w", encoding="utf-8") as out:
        for line in fh:
            parts = line.split()
            out.write(parts[0] + "\t" + " ".join(parts[1:-1]) + "\n")
    print(f"wrote {edges_out} and {features_out}")
    print("ingest with: aspectcite ingest --edges", edges_out, "--node-features", features_out,
          "--out-dir runs/cora --seed 0")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", type=Path, default=DEFAULT_DIR)
    parser.add_argument("--make-tsv", action="store_true", help="also write edges.tsv/features.tsv for the CLI")
    args = parser.parse_args()
    stage(args.dest)
    if args.make_tsv:
        make_tsv(args.dest)
    print("run the dataset-scale acceptance tests with: pytest tests/test_acceptance.py -s -m slow")
    return 0


if __name__ == "__main__":
    sys.exit(main())
