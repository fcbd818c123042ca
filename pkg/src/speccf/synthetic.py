"""Synthetic fixture generators for spectrum checks and end-to-end experiments."""
from __future__ import annotations

import numpy as np

from .data_io import FeatureMatrix, InteractionDataset, split_dataset


def random_connected_bipartite(num_users: int, num_items: int,
                               extra_edges: int = 0, rng=None) -> np.ndarray:
    """Random connected bipartite graph as (user, item) pairs.

    Nodes are added in the order u0, i0, u1, i1, ...; each new node attaches
    to a uniformly random earlier node of the other side, which yields a
    spanning tree, then ``extra_edges`` distinct random pairs are added.
    """
    if num_users < 1 or num_items < 1:
        raise ValueError("need at least one user and one item")
    rng = np.random.default_rng(rng)
    pairs = {(0, 0)}
    for t in range(1, max(num_users, num_items)):
        if t < num_users:
            pairs.add((t, int(rng.integers(min(t, num_items)))))
        if t < num_items:
            pairs.add((int(rng.integers(min(t + 1, num_users))), t))
    budget = num_users * num_items - len(pairs)
    if extra_edges > budget:
        raise ValueError(f"cannot add {extra_edges} extra edges, only {budget} slots")
    while extra_edges > 0:
        cand = (int(rng.integers(num_users)), int(rng.integers(num_items)))
        if cand not in pairs:
            pairs.add(cand)
            extra_edges -= 1
    return np.array(sorted(pairs), dtype=np.int64)


def two_community_dataset(num_users: int = 200, num_items: int = 120,
                          interactions_per_user: int = 12,
                          within_prob: float = 0.9,
                          feature_dim: int = 16,
                          feature_noise: float = 0.5,
                          prototype_scale: float = 1.0,
                          split_ratios=(0.8, 0.1, 0.1),
                          seed: int = 0):
    """Two-community interaction data with community-informative item features.

    Users and items are split into two equal halves; each user draws
    ``interactions_per_user`` distinct items, taking them from the own half
    with probability ``within_prob``. Item features are the community
    prototype plus Gaussian noise, so a neighbor graph built from them is
    noisy but informative about the block structure.

    Returns the already-split dataset and a single-modality feature list.
    """
    if num_users % 2 or num_items % 2:
        raise ValueError("num_users and num_items must be even")
    if interactions_per_user > num_items // 2:
        raise ValueError("interactions_per_user cannot exceed half the item count")
    if not 0.0 <= within_prob <= 1.0:
        raise ValueError("within_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    half_u, half_i = num_users // 2, num_items // 2
    pairs = []
    for u in range(num_users):
        own_base = half_i if u >= half_u else 0
        other_base = 0 if u >= half_u else half_i
        chosen = set()
        while len(chosen) < interactions_per_user:
            base = own_base if rng.random() < within_prob else other_base
            chosen.add(base + int(rng.integers(half_i)))
        pairs.extend((u, i) for i in sorted(chosen))
    dataset = InteractionDataset(num_users, num_items, np.array(pairs, dtype=np.int64))
    dataset = split_dataset(dataset, ratios=split_ratios, seed=seed)

    prototypes = prototype_scale * rng.normal(size=(2, feature_dim))
    community = (np.arange(num_items) >= half_i).astype(int)
    values = prototypes[community] + feature_noise * rng.normal(size=(num_items, feature_dim))
    features = [FeatureMatrix("community", values.astype(np.float32))]
    return dataset, features
