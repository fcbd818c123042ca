"""Top-N ranking evaluation: Recall@N and NDCG@N with train-item masking.

Scoring is a full ranking over all items (no sampled negatives); items the
user interacted with in the train split are masked to -inf first. Metrics are
macro-averaged over users with a nonempty evaluation set; users with nothing
to find are skipped, not zero-counted. Score ties break toward the lower item
index through a stable sort.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CUTOFFS = (10, 20)


@dataclass(frozen=True)
class MetricsReport:
    """Macro-averaged metrics plus the per-user vectors behind them."""

    split: str
    recall: dict
    ndcg: dict
    per_user_recall: dict = field(repr=False)
    per_user_ndcg: dict = field(repr=False)
    user_indices: np.ndarray = field(repr=False)

    @property
    def num_evaluated_users(self) -> int:
        return len(self.user_indices)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "num_evaluated_users": self.num_evaluated_users,
            **{f"recall@{n}": v for n, v in sorted(self.recall.items())},
            **{f"ndcg@{n}": v for n, v in sorted(self.ndcg.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_tsv(self) -> str:
        """One header line plus one value line, for results tables."""
        items = sorted(self.to_dict().items())
        header = "\t".join(k for k, _ in items)
        values = "\t".join(f"{v:.6f}" if isinstance(v, float) else str(v)
                           for _, v in items)
        return f"{header}\n{values}\n"


def score_users(final_embeddings, users, dataset) -> np.ndarray:
    """Inner-product scores over all items with the user's train items at -inf."""
    h = np.asarray(final_embeddings, dtype=np.float64)
    users = np.asarray(users, dtype=np.int64)
    item_vectors = h[dataset.num_users:]
    scores = h[users] @ item_vectors.T
    train_items = dataset.items_by_user("train")
    for row, u in enumerate(users):
        scores[row, train_items[u]] = -np.inf
    return scores


def rank_items(scores) -> np.ndarray:
    """Item indices by descending score; equal scores keep ascending index."""
    return np.argsort(-scores, axis=-1, kind="stable")


def recall_at_n(ranked_items, relevant, n: int) -> float:
    if n < 1:
        raise ValueError("cutoff must be >= 1")
    relevant = set(map(int, relevant))
    if not relevant:
        raise ValueError("relevant set must be nonempty")
    hits = sum(1 for i in ranked_items[:n] if int(i) in relevant)
    return hits / len(relevant)


def ndcg_at_n(ranked_items, relevant, n: int) -> float:
    if n < 1:
        raise ValueError("cutoff must be >= 1")
    relevant = set(map(int, relevant))
    if not relevant:
        raise ValueError("relevant set must be nonempty")
    dcg = sum(1.0 / np.log2(rank + 2)
              for rank, i in enumerate(ranked_items[:n]) if int(i) in relevant)
    ideal_hits = min(n, len(relevant))
    idcg = sum(1.0 / np.log2(rank + 2) for rank in range(ideal_hits))
    return dcg / idcg


def evaluate(final_embeddings, dataset, split: str = "val",
             cutoffs=DEFAULT_CUTOFFS, batch_users: int = 1024) -> MetricsReport:
    """Full-ranking Recall@N / NDCG@N macro-averaged over evaluable users."""
    if split not in ("val", "test"):
        raise ValueError(f"split must be 'val' or 'test', got {split!r}")
    eval_items = dataset.items_by_user(split)
    users = np.array([u for u in range(dataset.num_users) if len(eval_items[u])],
                     dtype=np.int64)
    if len(users) == 0:
        raise ValueError(f"split {split!r} is empty")

    cutoffs = tuple(sorted(cutoffs))
    per_recall = {n: np.empty(len(users)) for n in cutoffs}
    per_ndcg = {n: np.empty(len(users)) for n in cutoffs}
    max_n = cutoffs[-1]
    for start in range(0, len(users), batch_users):
        chunk = users[start:start + batch_users]
        ranked = rank_items(score_users(final_embeddings, chunk, dataset))[:, :max_n]
        for offset, u in enumerate(chunk):
            relevant = eval_items[u]
            row = ranked[offset]
            for n in cutoffs:
                per_recall[n][start + offset] = recall_at_n(row, relevant, n)
                per_ndcg[n][start + offset] = ndcg_at_n(row, relevant, n)

    return MetricsReport(
        split=split,
        recall={n: float(per_recall[n].mean()) for n in cutoffs},
        ndcg={n: float(per_ndcg[n].mean()) for n in cutoffs},
        per_user_recall=per_recall,
        per_user_ndcg=per_ndcg,
        user_indices=users,
    )
