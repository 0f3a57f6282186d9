"""Pair sampling, training loops, validation, and resumable checkpoints."""

import json
import logging
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import model as model_mod
from .autodiff import backward
from .graphs import LabeledPair
from .metrics import auc, mse_metric
from .model import Model, loss_mse, save_checkpoint, load_checkpoint
from .optim import Adam

log = logging.getLogger(__name__)

TRAIN_STATE_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    task: str = "regression"
    learning_rate: float | None = None  # default depends on task
    epochs: int = 100                   # classification schedule
    batch_pairs: int = 10               # 5 positive + 5 negative
    iterations: int = 10000             # regression schedule
    batch_size: int = 128
    seed: int = 0
    val_every: int = 100                # iterations between validations (regression)
    checkpoint_dir: str | None = None
    log_path: str | None = None
    grad_clip: float | None = None      # off unless rescuing a diverging run

    def __post_init__(self):
        if self.learning_rate is None:
            self.learning_rate = 0.5e-3 if self.task == "classification" else 5e-3
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.batch_pairs < 1 or self.batch_size < 1:
            raise ValueError("batch sizes must be >= 1")


@dataclass
class TrainReport:
    records: list
    best_val_loss: float
    best_checkpoint: str | None
    state_path: str | None


def sample_classification_pairs(groups, train_ids, rng):
    """One positive and one matching negative pair per training graph.

    Positives come from the graph's own group, negatives from any other
    group; graphs in singleton groups are skipped (no positive exists).
    Resampled fresh each epoch by the caller.
    """
    train_set = set(train_ids)
    eligible_groups = {gid: [m for m in members if m in train_set]
                       for gid, members in groups.items()}
    eligible_groups = {g: m for g, m in eligible_groups.items() if m}
    pairs = []
    skipped = 0
    for gid in train_ids:
        own = next(g for g, m in eligible_groups.items() if gid in m)
        mates = [m for m in eligible_groups[own] if m != gid]
        if not mates:
            skipped += 1
            continue
        pos = mates[int(rng.integers(0, len(mates)))]
        other_groups = [g for g in eligible_groups if g != own]
        og = other_groups[int(rng.integers(0, len(other_groups)))]
        members = eligible_groups[og]
        neg = members[int(rng.integers(0, len(members)))]
        pairs.append(LabeledPair(gid, pos, 1.0))
        pairs.append(LabeledPair(gid, neg, -1.0))
    if skipped:
        log.info("skipped %d graph(s) in singleton groups", skipped)
    return pairs


def _clip_grads(params, max_norm):
    total = np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params.values()))
    if total > max_norm:
        scale = max_norm / total
        for p in params.values():
            p.grad *= scale


def _batch_step(model, dataset, batch, optimizer, rng, grad_clip):
    preds = []
    targets = []
    for pair in batch:
        preds.append(model.forward_pair(dataset.graph(pair.g1), dataset.graph(pair.g2),
                                        training=True, rng=rng))
        targets.append(pair.target)
    loss = loss_mse(preds, targets)
    value = loss.item()
    if not np.isfinite(value):
        norms = {k: float(np.linalg.norm(p.data)) for k, p in model.params.items()}
        raise TrainingError(
            f"non-finite loss on batch {[(p.g1, p.g2) for p in batch]}; "
            f"max parameter norm {max(norms.values()):.3g}")
    model.zero_grad()
    backward(loss)
    if grad_clip is not None:
        _clip_grads(model.params, grad_clip)
    optimizer.step()
    return value


def evaluate_pairs(model, dataset, pairs):
    """Eval-mode predictions and targets for a list of pairs."""
    preds = np.empty(len(pairs))
    targets = np.empty(len(pairs))
    for i, pair in enumerate(pairs):
        preds[i] = model.forward_pair(dataset.graph(pair.g1),
                                      dataset.graph(pair.g2), training=False).item()
        targets[i] = pair.target
    return preds, targets


def _validation(model, dataset, val_pairs, task):
    if not val_pairs:
        return None, None
    preds, targets = evaluate_pairs(model, dataset, val_pairs)
    val_loss = mse_metric(preds, targets)
    metric = None
    if task == "classification":
        labels = np.where(targets > 0, 1, -1)
        if (labels == 1).any() and (labels == -1).any():
            metric = auc(preds, labels)
    return val_loss, metric


def _check_split_hygiene(dataset, pairs):
    held_out = set(dataset.split.get("test", ())) | set(dataset.split.get("val", ()))
    for p in pairs:
        if p.g1 in held_out or p.g2 in held_out:
            raise TrainingError(f"held-out graph in training pair ({p.g1}, {p.g2})")


def train(model: Model, dataset, config: TrainConfig, resume_from=None):
    """Run the task schedule, keeping the checkpoint with best validation loss.

    Emits one structured record per validation pass; with a checkpoint_dir,
    writes best.ckpt plus a full training state file suitable for resuming an
    interrupted run with an identical trajectory.
    """
    rng = np.random.default_rng(config.seed)
    optimizer = Adam(model.params, lr=config.learning_rate)
    records = []
    best_val = np.inf
    start_step = 0
    best_path = state_path = None
    if config.checkpoint_dir:
        os.makedirs(config.checkpoint_dir, exist_ok=True)
        best_path = os.path.join(config.checkpoint_dir, "best.ckpt")
        state_path = os.path.join(config.checkpoint_dir, "train_state.json")

    if resume_from is not None:
        start_step, best_val, records = _load_train_state(
            resume_from, model, optimizer, rng)

    val_pairs = dataset.pairs_for_split("val")

    def validate_and_record(step, train_loss):
        nonlocal best_val
        val_loss, metric = _validation(model, dataset, val_pairs, config.task)
        rec = {"step": step, "train_loss": train_loss,
               "val_loss": val_loss, "metric": metric}
        records.append(rec)
        if config.log_path:
            with open(config.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec) + "\n")
        if val_loss is not None and val_loss < best_val:
            best_val = val_loss
            if best_path:
                save_checkpoint(best_path, model, extra={"step": step, "val_loss": val_loss})
        if state_path:
            _save_train_state(state_path, model, optimizer, rng, step, best_val, records)

    if config.task == "classification":
        groups = dataset.groups
        if len(groups) < 2:
            raise TrainingError("classification needs at least 2 groups")
        train_ids = list(dataset.split["train"])
        for epoch in range(start_step, config.epochs):
            pairs = sample_classification_pairs(groups, train_ids, rng)
            _check_split_hygiene(dataset, pairs)
            order = rng.permutation(len(pairs) // 2)
            shuffled = []
            for k in order:
                shuffled.extend(pairs[2 * int(k):2 * int(k) + 2])
            losses = []
            for s in range(0, len(shuffled), config.batch_pairs):
                batch = shuffled[s:s + config.batch_pairs]
                losses.append(_batch_step(model, dataset, batch, optimizer,
                                          rng, config.grad_clip))
            validate_and_record(epoch + 1, float(np.mean(losses)) if losses else None)
    else:
        train_pairs = dataset.pairs_for_split("train")
        if not train_pairs:
            raise TrainingError("no training pairs")
        _check_split_hygiene(dataset, train_pairs)
        recent = []
        for it in range(start_step, config.iterations):
            idx = rng.integers(0, len(train_pairs), size=config.batch_size)
            batch = [train_pairs[int(i)] for i in idx]
            recent.append(_batch_step(model, dataset, batch, optimizer,
                                      rng, config.grad_clip))
            if (it + 1) % config.val_every == 0 or it + 1 == config.iterations:
                validate_and_record(it + 1, float(np.mean(recent)))
                recent = []

    return TrainReport(records=records, best_val_loss=float(best_val),
                       best_checkpoint=best_path, state_path=state_path)


# ---------------------------------------------------------------------------
# resumable training state

def _save_train_state(path, model, optimizer, rng, step, best_val, records):
    doc = {
        "version": TRAIN_STATE_VERSION,
        "step": step,
        "best_val_loss": None if not np.isfinite(best_val) else best_val,
        "records": records,
        "config": asdict(model.config),
        "params": {k: model_mod._encode_array(p.data)
                   for k, p in sorted(model.params.items())},
        "adam": {
            "step_count": optimizer.step_count,
            "m": {k: model_mod._encode_array(v) for k, v in sorted(optimizer.m.items())},
            "v": {k: model_mod._encode_array(v) for k, v in sorted(optimizer.v.items())},
        },
        "rng_state": rng.bit_generator.state,
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def _load_train_state(path, model, optimizer, rng):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != TRAIN_STATE_VERSION:
        raise TrainingError(f"unsupported train state version {doc.get('version')}")
    for k, p in model.params.items():
        p.data[...] = model_mod._decode_array(doc["params"][k])
        p.grad = None
    optimizer.step_count = doc["adam"]["step_count"]
    optimizer.m = {k: model_mod._decode_array(v) for k, v in doc["adam"]["m"].items()}
    optimizer.v = {k: model_mod._decode_array(v) for k, v in doc["adam"]["v"].items()}
    rng.bit_generator.state = doc["rng_state"]
    best = doc["best_val_loss"]
    return doc["step"], np.inf if best is None else best, list(doc["records"])
