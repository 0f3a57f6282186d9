"""Dataset files and synthetic generators.

On-disk layout (line-delimited JSON, UTF-8, stable key order):
  graphs.jsonl  {"id", "group"?, "labels"?, "nodes": [[f,...],...], "edges": [[u,v],...]}
  pairs.jsonl   {"g1", "g2", "y"}
  split.json    {"train": [ids], "val": [ids], "test": [ids]}

Two generators stand in for the real-world corpora: random labeled graphs
with exact edit-distance targets for the regression task, and perturbed
"clone groups" for the classification task.
"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .ged import ged_exact
from .graphs import Graph, LabeledPair, make_graph, validate

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    graphs: dict
    pairs: list
    split: dict
    task: str = "regression"

    def graph(self, gid):
        return self.graphs[gid]

    @property
    def groups(self):
        """group id -> list of member graph ids (classification datasets)."""
        out = {}
        for gid, g in self.graphs.items():
            grp = getattr(g, "_group", None)
            if grp is not None:
                out.setdefault(grp, []).append(gid)
        return out

    def pair_split(self, pair):
        """A pair belongs to test/val if it touches a test/val graph."""
        s1 = self._split_of(pair.g1)
        s2 = self._split_of(pair.g2)
        for name in ("test", "val"):
            if name in (s1, s2):
                return name
        return "train"

    def _split_of(self, gid):
        idx = getattr(self, "_split_index", None)
        if idx is None:
            idx = {g: name for name, ids in self.split.items() for g in ids}
            self._split_index = idx
        try:
            return idx[gid]
        except KeyError:
            raise DatasetError(f"graph {gid!r} is missing from the split") from None

    def pairs_for_split(self, name):
        return [p for p in self.pairs if self.pair_split(p) == name]


# groups travel on the Graph object without widening its schema
def _attach_group(g, group):
    object.__setattr__(g, "_group", group)
    return g


def graph_group(g):
    return getattr(g, "_group", None)


# Graph is a frozen dataclass with __slots__-free layout, so the attribute
# attach above works; keep it private to this module.


def _graph_record(g):
    rec = {"id": g.id}
    grp = graph_group(g)
    if grp is not None:
        rec["group"] = grp
    if g.labels is not None:
        rec["labels"] = list(g.labels)
    rec["nodes"] = [[float(x) for x in row] for row in np.asarray(g.features)]
    rec["edges"] = [[int(u), int(v)] for u, v in g.edges]
    return rec


def save_dataset(ds: Dataset, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "graphs.jsonl"), "w", encoding="utf-8") as fh:
        for g in ds.graphs.values():
            fh.write(json.dumps(_graph_record(g)) + "\n")
    with open(os.path.join(out_dir, "pairs.jsonl"), "w", encoding="utf-8") as fh:
        for p in ds.pairs:
            fh.write(json.dumps({"g1": p.g1, "g2": p.g2, "y": p.target}) + "\n")
    with open(os.path.join(out_dir, "split.json"), "w", encoding="utf-8") as fh:
        json.dump({k: list(v) for k, v in ds.split.items()}, fh)


def load_dataset(graphs_path, pairs_path=None, split_path=None, task="regression"):
    """Load and validate a dataset; errors cite the offending line."""
    graphs = {}
    width = None
    with open(graphs_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                g = make_graph(rec["id"], rec["nodes"], rec["edges"], rec.get("labels"))
            except (ValueError, KeyError, TypeError) as e:
                raise DatasetError(f"{graphs_path}:{lineno}: {e}") from e
            if rec["id"] in graphs:
                raise DatasetError(f"{graphs_path}:{lineno}: duplicate id {rec['id']!r}")
            if width is None:
                width = g.feature_dim
            elif g.feature_dim != width:
                raise DatasetError(
                    f"{graphs_path}:{lineno}: feature width {g.feature_dim} != {width}")
            if rec.get("group") is not None:
                _attach_group(g, str(rec["group"]))
            graphs[g.id] = g
    if not graphs:
        raise DatasetError(f"{graphs_path}: no graphs")

    pairs = []
    if pairs_path is not None and os.path.exists(pairs_path):
        with open(pairs_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    p = LabeledPair(str(rec["g1"]), str(rec["g2"]), float(rec["y"]))
                except (ValueError, KeyError, TypeError) as e:
                    raise DatasetError(f"{pairs_path}:{lineno}: {e}") from e
                for gid in (p.g1, p.g2):
                    if gid not in graphs:
                        raise DatasetError(
                            f"{pairs_path}:{lineno}: unknown graph id {gid!r}")
                pairs.append(p)
        if not pairs:
            log.warning("%s: empty pairs file", pairs_path)

    if split_path is not None and os.path.exists(split_path):
        with open(split_path, encoding="utf-8") as fh:
            split = {k: list(v) for k, v in json.load(fh).items()}
        seen = set()
        for name, ids in split.items():
            for gid in ids:
                if gid not in graphs:
                    raise DatasetError(f"{split_path}: unknown graph id {gid!r} in {name}")
                if gid in seen:
                    raise DatasetError(f"{split_path}: graph {gid!r} in multiple splits")
                seen.add(gid)
    else:
        split = {"train": list(graphs), "val": [], "test": []}
    return Dataset(graphs=graphs, pairs=pairs, split=split, task=task)


def load_dataset_dir(path, task="regression"):
    return load_dataset(os.path.join(path, "graphs.jsonl"),
                        os.path.join(path, "pairs.jsonl"),
                        os.path.join(path, "split.json"),
                        task=task)


# ---------------------------------------------------------------------------
# generators

def _connected(n, edges):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def _random_connected_edges(n, edge_prob, rng):
    """Random spanning tree plus independent extra edges."""
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        u = int(order[i])
        v = int(order[rng.integers(0, i)])
        edges.add((min(u, v), max(u, v)))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < edge_prob:
                edges.add((u, v))
    return sorted(edges)


def gen_ged_dataset(n_graphs, node_range=(4, 9), edge_prob=0.25, n_labels=3,
                    seed=0, max_train_pairs=None, eval_candidates=None,
                    node_budget=10, timeout=30.0):
    """Random connected labeled graphs with exact normalized GED targets.

    Node features are one-hot label encodings. Graphs split 60/20/20; pairs
    cover train x train (optionally subsampled), plus every val/test graph
    against train graphs (the retrieval layout used at evaluation time).
    """
    lo, hi = node_range
    if hi > node_budget:
        raise DatasetError(f"node_range max {hi} exceeds ged budget {node_budget}")
    rng = np.random.default_rng(seed)
    graphs = {}
    for i in range(n_graphs):
        n = int(rng.integers(lo, hi + 1))
        labels = [int(x) for x in rng.integers(0, n_labels, size=n)]
        feats = np.eye(n_labels)[labels]
        edges = _random_connected_edges(n, edge_prob, rng)
        g = make_graph(f"g{i:04d}", feats, edges, labels)
        graphs[g.id] = g

    ids = list(graphs)
    perm = [ids[int(i)] for i in rng.permutation(len(ids))]
    n_train = int(round(0.6 * len(perm)))
    n_val = int(round(0.2 * len(perm)))
    split = {"train": sorted(perm[:n_train]),
             "val": sorted(perm[n_train:n_train + n_val]),
             "test": sorted(perm[n_train + n_val:])}

    train = split["train"]
    cand_pairs = [(train[i], train[j])
                  for i in range(len(train)) for j in range(i + 1, len(train))]
    if max_train_pairs is not None and len(cand_pairs) > max_train_pairs:
        keep = rng.choice(len(cand_pairs), size=max_train_pairs, replace=False)
        cand_pairs = [cand_pairs[int(k)] for k in sorted(keep)]
    for name in ("val", "test"):
        cands = train
        if eval_candidates is not None and len(train) > eval_candidates:
            picked = rng.choice(len(train), size=eval_candidates, replace=False)
            cands = [train[int(k)] for k in sorted(picked)]
        for gid in split[name]:
            cand_pairs.extend((gid, c) for c in cands)

    pairs = []
    for g1, g2 in cand_pairs:
        res = ged_exact(graphs[g1], graphs[g2], node_budget=node_budget, timeout=timeout)
        pairs.append(LabeledPair(g1, g2, res.normalized_similarity))
    return Dataset(graphs=graphs, pairs=pairs, split=split, task="regression")


def _perturb(g_feats, g_edges, budget, rng, feature_dim):
    """Apply up to `budget` random edits, keeping the graph connected."""
    feats = [list(row) for row in g_feats]
    edges = set(g_edges)
    for _ in range(budget):
        for _attempt in range(20):
            n = len(feats)
            op = rng.choice(["edge_add", "edge_remove", "node_insert", "feature_noise"])
            if op == "edge_add" and n >= 2:
                u, v = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
                if (u, v) in edges:
                    continue
                edges.add((u, v))
                break
            if op == "edge_remove" and edges:
                cand = sorted(edges)[int(rng.integers(0, len(edges)))]
                trial = edges - {cand}
                if _connected(n, trial):
                    edges = trial
                    break
                continue
            if op == "node_insert":
                anchor = int(rng.integers(0, n))
                feats.append([float(x) for x in rng.integers(0, 10, size=feature_dim)])
                edges.add((anchor, n))
                break
            if op == "feature_noise":
                node = int(rng.integers(0, n))
                col = int(rng.integers(0, feature_dim))
                feats[node][col] = float(max(0.0, feats[node][col] + rng.normal(0, 1)))
                break
    return feats, sorted(edges)


def gen_clone_dataset(n_groups, variants_per_group, perturbation_budget, seed=0,
                      node_range=(6, 10), edge_prob=0.2, feature_dim=6,
                      eval_pairs_per_graph=1):
    """Groups of structural clones for the pair classification task.

    Each group is one seed graph plus variants within an edit budget of it.
    Split is 80/10/10 by group so no group straddles splits. The pairs list
    holds fixed positive/negative evaluation pairs for val and test graphs;
    training pairs are resampled each epoch by the trainer.
    """
    if perturbation_budget < 0:
        raise DatasetError("perturbation budget must be >= 0")
    rng = np.random.default_rng(seed)
    lo, hi = node_range
    graphs = {}
    group_members = {}
    for gi in range(n_groups):
        n = int(rng.integers(lo, hi + 1))
        feats = [[float(x) for x in rng.integers(0, 10, size=feature_dim)] for _ in range(n)]
        edges = _random_connected_edges(n, edge_prob, rng)
        members = []
        for vi in range(variants_per_group):
            if vi == 0:
                vfeats, vedges = feats, edges
            else:
                vfeats, vedges = _perturb(feats, edges, perturbation_budget, rng, feature_dim)
            gid = f"f{gi:04d}v{vi}"
            g = make_graph(gid, vfeats, vedges)
            _attach_group(g, f"f{gi:04d}")
            graphs[gid] = g
            members.append(gid)
        group_members[f"f{gi:04d}"] = members

    gids = sorted(group_members)
    perm = [gids[int(i)] for i in rng.permutation(len(gids))]
    n_train = int(round(0.8 * len(perm)))
    n_val = int(round(0.1 * len(perm)))
    split_groups = {"train": perm[:n_train],
                    "val": perm[n_train:n_train + n_val],
                    "test": perm[n_train + n_val:]}
    split = {name: sorted(g for grp in grps for g in group_members[grp])
             for name, grps in split_groups.items()}

    # fixed evaluation pairs for the held-out splits
    pairs = []
    for name in ("val", "test"):
        grps = split_groups[name]
        for grp in grps:
            members = group_members[grp]
            for gid in members:
                for _ in range(eval_pairs_per_graph):
                    others = [x for x in members if x != gid]
                    if others:
                        pos = others[int(rng.integers(0, len(others)))]
                        pairs.append(LabeledPair(gid, pos, 1.0))
                    other_groups = [x for x in grps if x != grp]
                    if other_groups:
                        og = other_groups[int(rng.integers(0, len(other_groups)))]
                        neg = group_members[og][int(rng.integers(0, variants_per_group))]
                        pairs.append(LabeledPair(gid, neg, -1.0))
    return Dataset(graphs=graphs, pairs=pairs, split=split, task="classification")


def convert_external_dataset(src_dir, out_dir):
    """Converter stub for the released GED benchmark layout.

    Expected input: a directory of per-graph GEXF/JSON files plus a
    ground-truth score matrix. Translating that layout into graphs.jsonl /
    pairs.jsonl / split.json is left to the operator; this stub documents the
    target schema and refuses rather than guessing at the source format.
    """
    raise NotImplementedError(
        "convert the released benchmark into graphs.jsonl/pairs.jsonl/split.json "
        "as documented in the data module; no automatic converter is provided")
