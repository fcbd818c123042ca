"""Loading, splitting, perturbing and persisting interaction/side-information data.

On-disk formats:
  * interactions: TSV ``user \\t item [\\t rating]``, UTF-8, ``#`` comments ignored
  * social edges: TSV ``user \\t user``
  * feature matrices: raw little-endian float32 row-major binary plus a JSON
    sidecar ``{"rows": R, "cols": C, "modality": name}``
  * splits: three TSVs of dense indices plus a JSON id-map file
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_EMPTY_PAIRS = np.empty((0, 2), dtype=np.int64)


class DataFormatError(ValueError):
    """Raised for malformed input files (message carries the line number)."""


@dataclass(frozen=True)
class InteractionDataset:
    """Sparse binary user-item interactions with train/val/test splits.

    An unsplit dataset carries everything in ``train`` with empty val/test.
    Pair arrays have shape (n, 2) with columns (user_index, item_index).
    """

    num_users: int
    num_items: int
    train: np.ndarray
    val: np.ndarray = field(default_factory=lambda: _EMPTY_PAIRS)
    test: np.ndarray = field(default_factory=lambda: _EMPTY_PAIRS)
    user_id_map: dict = field(default_factory=dict)
    item_id_map: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64).reshape(-1, 2)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    def all_pairs(self) -> np.ndarray:
        return np.concatenate([self.train, self.val, self.test], axis=0)

    def items_by_user(self, split: str = "train") -> list:
        """Per-user item index arrays for one split (empty array if none)."""
        pairs = getattr(self, split)
        counts = np.bincount(pairs[:, 0], minlength=self.num_users)
        order = np.argsort(pairs[:, 0], kind="stable")
        return np.split(pairs[order, 1], np.cumsum(counts)[:-1])


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense per-item feature matrix for one modality (item per row)."""

    modality_name: str
    values: np.ndarray  # (num_items, dim) float32

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float32)
        if vals.ndim != 2:
            raise ValueError("feature matrix must be 2-D (items x dim)")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite entries in modality {self.modality_name!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def num_items(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EdgeList:
    """Symmetric weighted graph stored as directed entries.

    Both (i, j) and (j, i) are present with equal weight; no self-loops.
    """

    num_nodes: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        for arr in (rows, cols, weights):
            arr.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", weights)

    @property
    def num_directed(self) -> int:
        return len(self.rows)

    @property
    def num_undirected(self) -> int:
        return len(self.rows) // 2

    def undirected_pairs(self) -> np.ndarray:
        """The (i, j) pairs with i < j, sorted, shape (m, 2)."""
        keep = self.rows < self.cols
        pairs = np.stack([self.rows[keep], self.cols[keep]], axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]


def _edge_list_from_undirected(num_nodes, pairs, weights=None) -> EdgeList:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if weights is None:
        weights = np.ones(len(pairs))
    weights = np.asarray(weights, dtype=np.float64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    return EdgeList(num_nodes, rows, cols, np.concatenate([weights, weights]))


def _read_tsv(path):
    """Yield (line_number, fields) for non-comment, non-blank lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_interactions(path, min_interactions: int = 5,
                      rating_threshold: float = 4.0) -> InteractionDataset:
    """Load a TSV of implicit interactions into a dense-indexed dataset.

    Lines are ``user \\t item`` or ``user \\t item \\t rating``; when a rating
    column is present only rows with rating >= ``rating_threshold`` are kept.
    Duplicates collapse to one pair. Users and items with fewer than
    ``min_interactions`` interactions are removed iteratively until stable.
    """
    pairs = set()
    for lineno, fields in _read_tsv(path):
        if len(fields) not in (2, 3):
            raise DataFormatError(
                f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(fields)}")
        user, item = fields[0].strip(), fields[1].strip()
        if not user or not item:
            raise DataFormatError(f"{path}:{lineno}: empty user or item id")
        if len(fields) == 3:
            try:
                rating = float(fields[2])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad rating {fields[2]!r}") from exc
            if rating < rating_threshold:
                continue
        pairs.add((user, item))

    pairs = _kcore_filter(pairs, min_interactions)
    if not pairs:
        raise DataFormatError(f"{path}: no interactions left after filtering")

    users = sorted({u for u, _ in pairs})
    items = sorted({i for _, i in pairs})
    user_map = {u: k for k, u in enumerate(users)}
    item_map = {i: k for k, i in enumerate(items)}
    dense = np.array(sorted((user_map[u], item_map[i]) for u, i in pairs), dtype=np.int64)
    return InteractionDataset(len(users), len(items), dense,
                              user_id_map=user_map, item_id_map=item_map)


def _kcore_filter(pairs, min_interactions):
    """Iteratively drop users/items with < min_interactions pairs until stable."""
    pairs = set(pairs)
    while True:
        user_count, item_count = {}, {}
        for u, i in pairs:
            user_count[u] = user_count.get(u, 0) + 1
            item_count[i] = item_count.get(i, 0) + 1
        bad_users = {u for u, c in user_count.items() if c < min_interactions}
        bad_items = {i for i, c in item_count.items() if c < min_interactions}
        if not bad_users and not bad_items:
            return pairs
        pairs = {(u, i) for u, i in pairs if u not in bad_users and i not in bad_items}


def split_dataset(dataset: InteractionDataset, ratios=(0.8, 0.1, 0.1),
                  seed: int = 0) -> InteractionDataset:
    """Per-user random split of an unsplit dataset.

    Each user's interactions are shuffled with a generator seeded by ``seed``
    and partitioned so that val and test receive floor(ratio * n) items each,
    with the remainder (always >= 1) going to train. Deterministic per seed.
    """
    if len(dataset.val) or len(dataset.test):
        raise ValueError("dataset is already split")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    by_user = [[] for _ in range(dataset.num_users)]
    for u, i in dataset.train:
        by_user[u].append(i)

    train, val, test = [], [], []
    for u in range(dataset.num_users):
        items = np.sort(np.array(by_user[u], dtype=np.int64))
        rng.shuffle(items)
        n = len(items)
        n_val = int(ratios[1] * n)
        n_test = int(ratios[2] * n)
        while n - n_val - n_test < 1 and (n_val or n_test):
            if n_test:
                n_test -= 1
            else:
                n_val -= 1
        n_train = n - n_val - n_test
        train.extend((u, i) for i in items[:n_train])
        val.extend((u, i) for i in items[n_train:n_train + n_val])
        test.extend((u, i) for i in items[n_train + n_val:])

    def _arr(p):
        return np.array(p, dtype=np.int64).reshape(-1, 2)

    return InteractionDataset(dataset.num_users, dataset.num_items,
                              _arr(train), _arr(val), _arr(test),
                              dataset.user_id_map, dataset.item_id_map)


def load_social_edges(path, user_id_map: dict) -> EdgeList:
    """Load a TSV of ``user \\t user`` relations as a symmetric unit-weight graph.

    Self-loops are dropped, duplicates collapse, and edges touching ids absent
    from ``user_id_map`` (e.g. users removed by interaction filtering) are
    skipped with a counted warning.
    """
    num_users = len(user_id_map)
    undirected = set()
    skipped = 0
    for lineno, fields in _read_tsv(path):
        if len(fields) != 2:
            raise DataFormatError(
                f"{path}:{lineno}: expected 2 tab-separated fields, got {len(fields)}")
        a, b = fields[0].strip(), fields[1].strip()
        if a not in user_id_map or b not in user_id_map:
            skipped += 1
            continue
        i, j = user_id_map[a], user_id_map[b]
        if i == j:
            continue
        undirected.add((min(i, j), max(i, j)))
    if skipped:
        log.warning("%s: skipped %d edges with unknown user ids", path, skipped)
    pairs = sorted(undirected)
    return _edge_list_from_undirected(num_users, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def inject_feature_noise(features: FeatureMatrix, delta: float,
                         seed: int = 0) -> FeatureMatrix:
    """Perturb every feature entry with independent N(0, delta^2) noise."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return FeatureMatrix(features.modality_name, features.values.copy())
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, delta, size=features.values.shape).astype(np.float32)
    return FeatureMatrix(features.modality_name, features.values + noise)


def inject_edge_noise(graph: EdgeList, delta: float, seed: int = 0,
                      replace_originals: bool = True) -> EdgeList:
    """Replace a delta fraction of undirected edges with uniformly sampled fakes.

    floor(delta * m) undirected edges are chosen uniformly and swapped for the
    same number of uniformly sampled non-existing, non-self-loop undirected
    edges; the result is re-symmetrized, so edge count and symmetry are
    preserved. With ``replace_originals=False`` the originals are kept and the
    fakes are added on top (edge count grows).
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must be in [0, 1]")
    pairs = graph.undirected_pairs()
    m = len(pairs)
    k = int(delta * m)
    if k == 0:
        return EdgeList(graph.num_nodes, graph.rows, graph.cols, graph.weights)

    n = graph.num_nodes
    total_possible = n * (n - 1) // 2
    if k > total_possible - m:
        raise ValueError(
            f"graph too dense: need {k} replacement edges but only "
            f"{total_possible - m} non-edges exist")

    rng = np.random.default_rng(seed)
    existing = {(int(i), int(j)) for i, j in pairs}
    drop = set(map(int, rng.choice(m, size=k, replace=False))) if replace_originals else set()

    fakes = set()
    budget = 1000 * k + 10000
    while len(fakes) < k:
        if budget <= 0:
            raise ValueError("could not place replacement edges within sampling budget")
        budget -= 1
        i, j = int(rng.integers(n)), int(rng.integers(n))
        if i == j:
            continue
        e = (min(i, j), max(i, j))
        if e in existing or e in fakes:
            continue
        fakes.add(e)

    kept = [tuple(map(int, p)) for idx, p in enumerate(pairs) if idx not in drop]
    new_pairs = sorted(set(kept) | fakes)
    return _edge_list_from_undirected(n, np.array(new_pairs, dtype=np.int64).reshape(-1, 2))


# --- persistence -----------------------------------------------------------

def save_features(features: FeatureMatrix, bin_path) -> None:
    """Write raw little-endian float32 row-major binary plus a JSON sidecar."""
    bin_path = Path(bin_path)
    features.values.astype("<f4").tofile(bin_path)
    sidecar = {"rows": features.num_items, "cols": features.dim,
               "modality": features.modality_name}
    bin_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_features(bin_path) -> FeatureMatrix:
    bin_path = Path(bin_path)
    sidecar_path = bin_path.with_suffix(".json")
    if not sidecar_path.exists():
        raise DataFormatError(f"missing sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text())
    values = np.fromfile(bin_path, dtype="<f4")
    expected = meta["rows"] * meta["cols"]
    if values.size != expected:
        raise DataFormatError(
            f"{bin_path}: expected {expected} float32 values, found {values.size}")
    return FeatureMatrix(meta["modality"], values.reshape(meta["rows"], meta["cols"]))


def save_splits(dataset: InteractionDataset, out_dir) -> None:
    """Persist splits as three index TSVs plus a JSON id-map file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("train", "val", "test"):
        lines = [f"{u}\t{i}" for u, i in getattr(dataset, name)]
        (out_dir / f"{name}.tsv").write_text("\n".join(lines) + ("\n" if lines else ""))
    maps = {"num_users": dataset.num_users, "num_items": dataset.num_items,
            "user_id_map": dataset.user_id_map, "item_id_map": dataset.item_id_map}
    (out_dir / "id_maps.json").write_text(json.dumps(maps, indent=2, sort_keys=True) + "\n")


def load_splits(in_dir) -> InteractionDataset:
    in_dir = Path(in_dir)
    maps = json.loads((in_dir / "id_maps.json").read_text())

    def _read_pairs(name):
        rows = [tuple(map(int, f)) for _, f in _read_tsv(in_dir / f"{name}.tsv")]
        return np.array(rows, dtype=np.int64).reshape(-1, 2)

    return InteractionDataset(maps["num_users"], maps["num_items"],
                              _read_pairs("train"), _read_pairs("val"), _read_pairs("test"),
                              maps["user_id_map"], maps["item_id_map"])
