"""BPR training of propagated embeddings with Adam and early stopping.

Embeddings are stored float32; propagation, loss, and gradient run in float64.
The backward pass never needs autodiff: propagation is linear in E and the
filter polynomial g(op) is symmetric, so dL/dE = g(op) @ dL/dH -- one extra
propagation per step.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .evaluation import evaluate
from .filters import FilterSpec, propagate

HISTORY_COLUMNS = ("epoch", "loss", "recall@10", "recall@20", "ndcg@10", "ndcg@20")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 2048
    dim: int = 64
    epochs: int = 500
    patience: int = 20
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.dim < 1:
            raise ValueError("learning_rate, batch_size and dim must be positive")
        if self.epochs < 1 or self.patience < 0 or self.l2 < 0:
            raise ValueError("epochs >= 1, patience >= 0, l2 >= 0 required")


@dataclass
class EmbeddingTable:
    """(num_users + num_items) x dim trainable table, users first."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("embedding table must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite embedding entries")

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.values.copy())


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def update(self, values64: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """One Adam step; returns the updated parameter matrix (float64)."""
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.step += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.step)
        v_hat = self.v / (1 - self.beta2 ** self.step)
        return values64 - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def init_embeddings(num_nodes: int, dim: int, seed: int = 0) -> EmbeddingTable:
    """Gaussian init with standard deviation 0.01, deterministic per seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    return EmbeddingTable(rng.normal(0.0, 0.01, size=(num_nodes, dim)).astype(np.float32))


def sample_bpr_batch(train_pairs, num_items: int, batch_size: int, rng,
                     item_sets=None, max_attempts: int = 1000):
    """(users, positives, negatives) with negatives uniform over non-interacted items.

    One negative per positive, resampled until it misses the user's train set;
    a user interacting with every item exhausts the resample budget and raises.
    """
    train_pairs = np.asarray(train_pairs)
    if len(train_pairs) == 0:
        raise ValueError("train split is empty")
    if item_sets is None:
        item_sets = {}
        for u, i in train_pairs:
            item_sets.setdefault(int(u), set()).add(int(i))
        item_sets = [item_sets.get(u, set()) for u in range(int(train_pairs[:, 0].max()) + 1)]
    picks = rng.integers(len(train_pairs), size=batch_size)
    users = train_pairs[picks, 0]
    positives = train_pairs[picks, 1]
    negatives = rng.integers(num_items, size=batch_size)
    bad = np.array([int(n) in item_sets[int(u)] for u, n in zip(users, negatives)])
    attempts = 0
    while bad.any():
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(
                "negative sampling exhausted its budget; some user interacts "
                "with every item")
        redraw = rng.integers(num_items, size=int(bad.sum()))
        negatives[bad] = redraw
        bad_idx = np.flatnonzero(bad)
        still = np.array([int(negatives[k]) in item_sets[int(users[k])] for k in bad_idx])
        bad = np.zeros_like(bad)
        bad[bad_idx[still]] = True
    return users, positives, negatives


def bpr_loss_and_grad(values64, op, spec: FilterSpec, batch, num_users: int,
                      l2: float = 0.0):
    """Mean BPR loss over the batch and its gradient with respect to E.

    Loss per triple is -log sigmoid(h_u . h_p - h_u . h_n) plus an optional
    l2 penalty on the pre-propagation embedding rows the triple touches
    (also averaged over the batch).
    """
    users, positives, negatives = (np.asarray(a, dtype=np.int64) for a in batch)
    pos_rows = num_users + positives
    neg_rows = num_users + negatives
    h = propagate(op, values64, spec)
    h_u, h_p, h_n = h[users], h[pos_rows], h[neg_rows]
    margin = np.einsum("ij,ij->i", h_u, h_p - h_n)
    k = len(users)
    loss = float(np.logaddexp(0.0, -margin).mean())

    coef = (-expit(-margin) / k)[:, None]
    grad_h = np.zeros_like(h)
    np.add.at(grad_h, users, coef * (h_p - h_n))
    np.add.at(grad_h, pos_rows, coef * h_u)
    np.add.at(grad_h, neg_rows, -coef * h_u)
    grad = propagate(op, grad_h, spec)  # g(op) is symmetric

    if l2 > 0.0:
        rows = np.concatenate([users, pos_rows, neg_rows])
        loss += l2 * float(np.einsum("ij,ij->", values64[rows], values64[rows])) / k
        np.add.at(grad, rows, (2.0 * l2 / k) * values64[rows])
    return loss, grad


def bpr_step(embeddings: EmbeddingTable, op, spec: FilterSpec, batch,
             adam: AdamState, num_users: int, l2: float = 0.0) -> float:
    """One training step: loss, analytic gradient, Adam update in place."""
    values64 = embeddings.values.astype(np.float64)
    loss, grad = bpr_loss_and_grad(values64, op, spec, batch, num_users, l2)
    if not math.isfinite(loss):
        raise RuntimeError(
            f"non-finite BPR loss ({loss}); embeddings or learning rate diverged")
    embeddings.values = adam.update(values64, grad).astype(np.float32)
    return loss


def train_loop(dataset, op, spec: FilterSpec, config: TrainConfig):
    """Epoch loop with validation-NDCG@20 early stopping.

    Returns the best-validation embedding snapshot and a per-epoch history of
    mean loss plus validation Recall/NDCG at 10 and 20.
    """
    num_nodes = dataset.num_users + dataset.num_items
    embeddings = init_embeddings(num_nodes, config.dim, seed=config.seed)
    adam = AdamState(learning_rate=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    item_sets = [set(map(int, arr)) for arr in dataset.items_by_user("train")]
    steps_per_epoch = max(1, math.ceil(len(dataset.train) / config.batch_size))

    history = []
    best_metric = -np.inf
    best_values = embeddings.values.copy()
    epochs_since_best = 0
    for epoch in range(1, config.epochs + 1):
        losses = []
        for _ in range(steps_per_epoch):
            batch = sample_bpr_batch(dataset.train, dataset.num_items,
                                     config.batch_size, rng, item_sets)
            losses.append(bpr_step(embeddings, op, spec, batch, adam,
                                   dataset.num_users, config.l2))
        final = propagate(op, embeddings.values.astype(np.float64), spec)
        report = evaluate(final, dataset, "val", cutoffs=(10, 20))
        history.append({
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "recall@10": report.recall[10],
            "recall@20": report.recall[20],
            "ndcg@10": report.ndcg[10],
            "ndcg@20": report.ndcg[20],
        })
        if report.ndcg[20] > best_metric:
            best_metric = report.ndcg[20]
            best_values = embeddings.values.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if epochs_since_best >= config.patience:
            break
    return EmbeddingTable(best_values), history


# --- persistence -----------------------------------------------------------

def save_checkpoint(embeddings: EmbeddingTable, metadata: dict, path) -> None:
    """Raw little-endian float32 table plus a JSON sidecar with shape/metadata."""
    path = Path(path)
    embeddings.values.astype("<f4").tofile(path)
    meta = dict(metadata)
    meta["shape"] = list(embeddings.values.shape)
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    rows, cols = meta["shape"]
    values = np.fromfile(path, dtype="<f4")
    if values.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} float32 values, "
                         f"found {values.size}")
    return EmbeddingTable(values.reshape(rows, cols)), meta


def write_history_csv(history, path) -> None:
    lines = [",".join(HISTORY_COLUMNS)]
    for row in history:
        lines.append(",".join(
            str(row["epoch"]) if col == "epoch" else f"{row[col]:.8f}"
            for col in HISTORY_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")
