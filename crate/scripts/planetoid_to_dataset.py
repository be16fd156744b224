#!/usr/bin/env python3
"""Convert Planetoid raw files (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into the directory layout read by `pnd`: manifest.json, edges.tsv,
features.tsv, labels.tsv.

    python3 scripts/planetoid_to_dataset.py path/to/raw cora data/cora

Needs numpy and scipy. Features are row-normalized unless --raw-features.
CiteSeer's isolated test nodes (missing from tx/ty) get zero features and
label 0, matching the usual preprocessing.
"""

import argparse
import json
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load_part(raw, name, part):
    with open(os.path.join(raw, f"ind.{name}.{part}"), "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(raw, name, out, normalize=True):
    x, y, tx, ty, allx, ally, graph = (load_part(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    with open(os.path.join(raw, f"ind.{name}.test.index")) as f:
        test_idx = [int(line) for line in f if line.strip()]
    test_sorted = sorted(test_idx)

    if name == "citeseer":
        full = range(test_sorted[0], test_sorted[-1] + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[np.array(test_sorted) - test_sorted[0], :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[np.array(test_sorted) - test_sorted[0], :] = ty
        tx, ty = tx_ext, ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[test_sorted, :]
    features = features.toarray().astype(np.float64)
    labels = onehot.argmax(axis=1)

    n = features.shape[0]
    if normalize:
        sums = features.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        features = features / sums

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    os.makedirs(out, exist_ok=True)
    manifest = {"name": name, "num_nodes": n, "num_classes": int(onehot.shape[1]), "feature_dim": int(features.shape[1])}
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
    with open(os.path.join(out, "edges.tsv"), "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")
    with open(os.path.join(out, "features.tsv"), "w") as f:
        for row in features:
            f.write("\t".join(repr(float(v)) for v in row) + "\n")
    with open(os.path.join(out, "labels.tsv"), "w") as f:
        for y in labels:
            f.write(f"{int(y)}\n")
    return manifest, len(edges)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw", help="directory holding ind.<name>.* files")
    ap.add_argument("name", help="cora, citeseer or pubmed")
    ap.add_argument("out", help="output dataset directory")
    ap.add_argument("--raw-features", action="store_true", help="skip row normalization")
    args = ap.parse_args()
    manifest, m = convert(args.raw, args.name, args.out, not args.raw_features)
    print(f"{args.out}: {manifest['num_nodes']} nodes, {m} edges, {manifest['num_classes']} classes", file=sys.stderr)


if __name__ == "__main__":
    main()
