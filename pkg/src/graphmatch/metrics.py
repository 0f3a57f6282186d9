"""Evaluation metrics: AUC for pair classification; mse, rank correlations
and precision-at-k for similarity regression."""

from dataclasses import dataclass

import numpy as np
from scipy import stats


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class RankedQueryResult:
    """One retrieval query: candidate ids with predicted and true scores."""

    query_id: str
    candidates: tuple  # of (candidate_id, predicted, truth)


def auc(scores, labels):
    """Mann-Whitney AUC: P(random positive outscores a random negative),
    counting ties as one half. Threshold free."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == -1]
    if len(pos) == 0 or len(neg) == 0:
        raise MetricError("AUC needs both classes present")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def mse_metric(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.size == 0:
        raise MetricError("mse of empty input")
    if pred.shape != truth.shape:
        raise MetricError("mse length mismatch")
    return float(np.mean((pred - truth) ** 2))


def spearman_rho(pred, truth):
    """Pearson correlation of average-ranked data (ties get mean rank)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.size < 2:
        raise MetricError("rank correlation needs at least 2 points")
    if np.all(pred == pred[0]) or np.all(truth == truth[0]):
        raise MetricError("rank correlation undefined for constant input")
    return float(stats.spearmanr(pred, truth).statistic)


def kendall_tau(pred, truth):
    """Tie-corrected tau-b over concordant/discordant pairs."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.size < 2:
        raise MetricError("rank correlation needs at least 2 points")
    if np.all(pred == pred[0]) or np.all(truth == truth[0]):
        raise MetricError("rank correlation undefined for constant input")
    return float(stats.kendalltau(pred, truth, variant="b").statistic)


def _top_k(entries, key_idx, k):
    # sort by score descending, ties broken by ascending candidate id
    ranked = sorted(entries, key=lambda e: (-e[key_idx], e[0]))
    return {e[0] for e in ranked[:k]}


def precision_at_k(results, k):
    """Mean over queries of |top-k predicted ∩ top-k true| / k."""
    if not results:
        raise MetricError("precision_at_k needs at least one query")
    vals = []
    for r in results:
        if len(r.candidates) < k:
            raise MetricError(
                f"query {r.query_id!r} has {len(r.candidates)} candidates, need >= {k}")
        pred_top = _top_k(r.candidates, 1, k)
        true_top = _top_k(r.candidates, 2, k)
        vals.append(len(pred_top & true_top) / k)
    return float(np.mean(vals))
