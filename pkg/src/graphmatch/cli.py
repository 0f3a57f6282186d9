"""Command-line entry point: dataset generation, edit-distance queries,
training, evaluation, and pair scoring.

Every command resolves its full configuration, writes a run manifest into the
output directory before doing any work, and exits nonzero on any error.
Progress goes to stderr; machine-readable results go to files.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
import time

from . import __version__
from .data import (gen_clone_dataset, gen_ged_dataset, load_dataset,
                   load_dataset_dir, save_dataset)
from .ged import EditCostScheme, GedBudgetError, ged_exact
from .model import Model, ModelConfig, load_checkpoint, save_checkpoint
from .report import evaluate_model, write_report
from .training import TrainConfig, train

log = logging.getLogger("graphmatch")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, config, seed, inputs=()):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "dataset_checksums": {p: _sha256(p) for p in inputs if os.path.exists(p)},
        "code_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = os.path.join(out_dir, "run_manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _load_single_graph(path):
    ds = load_dataset(path)
    if len(ds.graphs) != 1:
        raise ValueError(f"{path}: expected exactly one graph, found {len(ds.graphs)}")
    return next(iter(ds.graphs.values()))


def cmd_gen(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    write_manifest(args.out, f"gen {args.kind}", cfg, args.seed)
    if args.kind == "ged":
        ds = gen_ged_dataset(args.graphs, node_range=tuple(args.node_range),
                             edge_prob=args.edge_prob, seed=args.seed,
                             max_train_pairs=args.max_train_pairs,
                             eval_candidates=args.eval_candidates)
    else:
        ds = gen_clone_dataset(args.groups, args.variants, args.budget, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds.graphs)} graphs, {len(ds.pairs)} pairs to {args.out}",
          file=sys.stderr)
    return 0


def cmd_ged(args):
    g1 = _load_single_graph(args.g1)
    g2 = _load_single_graph(args.g2)
    try:
        res = ged_exact(g1, g2, EditCostScheme(), node_budget=args.budget,
                        timeout=args.timeout)
    except GedBudgetError as e:
        print(f"refused: {e}", file=sys.stderr)
        return 2
    print(json.dumps({"distance": res.distance,
                      "normalized_similarity": res.normalized_similarity,
                      "nodes_expanded": res.nodes_expanded}))
    return 0


def _model_config_from(args, file_cfg, feature_dim):
    cfg = dict(file_cfg.get("model", {}))
    cfg["feature_dim"] = feature_dim
    for key, flag in (("mode", "mode"), ("task", "task"),
                      ("sgnn_aggregator", "sgnn_agg"),
                      ("perspectives", "perspectives"),
                      ("gcn_layers", "gcn_layers"),
                      ("gcn_dim", "gcn_dim")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    return ModelConfig(**cfg)


def cmd_train(args):
    file_cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
    ds = load_dataset_dir(args.dataset, task=args.task or
                          file_cfg.get("train", {}).get("task", "regression"))
    feature_dim = next(iter(ds.graphs.values())).feature_dim
    mcfg = _model_config_from(args, file_cfg, feature_dim)
    tkw = dict(file_cfg.get("train", {}))
    tkw["task"] = mcfg.task
    for key in ("seed", "epochs", "iterations", "batch_size", "learning_rate"):
        val = getattr(args, key, None)
        if val is not None:
            tkw[key] = val
    tkw["checkpoint_dir"] = args.out
    tkw.setdefault("log_path", os.path.join(args.out, "train_log.jsonl"))
    tcfg = TrainConfig(**tkw)
    inputs = [os.path.join(args.dataset, f)
              for f in ("graphs.jsonl", "pairs.jsonl", "split.json")]
    write_manifest(args.out, "train", {"model": mcfg.__dict__, "train": tcfg.__dict__},
                   tcfg.seed, inputs)
    import numpy as np
    model = Model(mcfg, rng=np.random.default_rng(tcfg.seed))
    report = train(model, ds, tcfg, resume_from=args.resume)
    final = os.path.join(args.out, "final.ckpt")
    save_checkpoint(final, model)
    print(f"best val loss {report.best_val_loss:.6g}; "
          f"best checkpoint {report.best_checkpoint}", file=sys.stderr)
    return 0


def cmd_eval(args):
    model, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset_dir(args.dataset, task=model.config.task)
    os.makedirs(args.out, exist_ok=True)
    write_manifest(args.out, "eval", {"checkpoint": args.checkpoint}, 0,
                   [args.checkpoint])
    rep = evaluate_model(model, ds, split=args.split)
    out_path = os.path.join(args.out, "eval_report.json")
    write_report(out_path, rep, dataset_id=args.dataset, checkpoint_id=args.checkpoint)
    print(json.dumps(rep, indent=2))
    return 0


def cmd_score(args):
    model, _ = load_checkpoint(args.checkpoint)
    g1 = _load_single_graph(args.g1)
    g2 = _load_single_graph(args.g2)
    score = model.forward_pair(g1, g2, training=False).item()
    print(f"{score:.6f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="graphmatch")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("kind", choices=["ged", "clone"])
    g.add_argument("--graphs", type=int, default=50)
    g.add_argument("--node-range", type=int, nargs=2, default=[4, 9])
    g.add_argument("--edge-prob", type=float, default=0.25)
    g.add_argument("--max-train-pairs", type=int, default=None)
    g.add_argument("--eval-candidates", type=int, default=None)
    g.add_argument("--groups", type=int, default=100)
    g.add_argument("--variants", type=int, default=4)
    g.add_argument("--budget", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("ged", help="exact edit distance between two graph files")
    d.add_argument("g1")
    d.add_argument("g2")
    d.add_argument("--budget", type=int, default=10)
    d.add_argument("--timeout", type=float, default=10.0)
    d.set_defaults(func=cmd_ged)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--dataset", required=True)
    t.add_argument("--config", help="JSON file with model/train sections")
    t.add_argument("--task", choices=["classification", "regression"])
    t.add_argument("--mode", choices=["sgnn", "ngmn", "mgmn"])
    t.add_argument("--sgnn-agg", choices=["max", "fcmax", "bilstm"])
    t.add_argument("--perspectives", type=int)
    t.add_argument("--gcn-layers", type=int)
    t.add_argument("--gcn-dim", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--iterations", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--learning-rate", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--resume", help="train_state.json to continue from")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("score", help="score one pair of graph files")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("g1")
    s.add_argument("g2")
    s.set_defaults(func=cmd_score)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except Exception as e:  # surface a clean message, nonzero exit
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
