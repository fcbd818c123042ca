"""Graph assembly: bipartite, side-information, and augmented adjacencies.

All sparse matrices are ``scipy.sparse.csr_array`` in canonical form: float64
data, sorted and duplicate-free column indices, no explicit zeros. The CSR
fields (indptr / indices / data) are the on-disk layout as well, see
:func:`save_graph`. Node ordering everywhere is users first, then items.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

__all__ = [
    "KnnConfig", "NormalizedAdjacency", "build_bipartite", "rescale_social",
    "build_knn_graph", "assemble_augmented", "sym_normalize", "spmm",
    "canonical_csr", "graph_info", "save_graph", "load_graph",
]


def canonical_csr(matrix) -> sparse.csr_array:
    """Coerce to canonical float64 CSR (sorted unique indices, no stored zeros)."""
    out = sparse.csr_array(matrix).astype(np.float64)
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    if out.nnz and not np.all(np.isfinite(out.data)):
        raise ValueError("sparse matrix contains non-finite values")
    return out


def _empty(n_rows, n_cols) -> sparse.csr_array:
    return sparse.csr_array((n_rows, n_cols), dtype=np.float64)


@dataclass(frozen=True)
class KnnConfig:
    """Configuration for the multimodal item-item neighbor graph."""

    kappa: int
    modality_weights: dict | None = None  # modality name -> weight; None = all 1
    similarity: str = "inner"

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.similarity not in ("inner", "cosine"):
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if self.modality_weights is not None:
            for name, w in self.modality_weights.items():
                if not np.isfinite(w) or w < 0:
                    raise ValueError(f"bad weight for modality {name!r}: {w}")


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric sqrt-normalized adjacency plus its pre-normalization degrees.

    ``num_users`` is carried along when known so downstream code can slice the
    user/item blocks; it is not needed for propagation itself.
    """

    matrix: sparse.csr_array
    degrees: np.ndarray
    num_users: int | None = None

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_items(self) -> int | None:
        return None if self.num_users is None else self.num_nodes - self.num_users


def build_bipartite(train_pairs, num_users: int, num_items: int) -> sparse.csr_array:
    """Symmetric (num_users+num_items)^2 adjacency of the user-item graph.

    Entry (u, num_users + i) = (num_users + i, u) = 1 for every train pair;
    both diagonal blocks are zero.
    """
    pairs = np.asarray(train_pairs, dtype=np.int64).reshape(-1, 2)
    n = num_users + num_items
    if len(pairs) == 0:
        return _empty(n, n)
    if pairs[:, 0].min() < 0 or pairs[:, 0].max() >= num_users:
        raise IndexError("user index out of range")
    if pairs[:, 1].min() < 0 or pairs[:, 1].max() >= num_items:
        raise IndexError("item index out of range")
    pairs = np.unique(pairs, axis=0)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1] + num_users])
    cols = np.concatenate([pairs[:, 1] + num_users, pairs[:, 0]])
    data = np.ones(len(rows))
    return canonical_csr(sparse.coo_array((data, (rows, cols)), shape=(n, n)))


def rescale_social(edges, kappa: float) -> sparse.csr_array:
    """kappa-rescaled user-user adjacency; kappa = 0 gives the empty matrix."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    n = edges.num_nodes
    if kappa == 0 or edges.num_directed == 0:
        return _empty(n, n)
    coo = sparse.coo_array((edges.weights * kappa, (edges.rows, edges.cols)), shape=(n, n))
    return canonical_csr(coo)


def build_knn_graph(features, config: KnnConfig) -> sparse.csr_array:
    """Weighted average of per-modality top-kappa neighbor graphs.

    For each modality the directed graph links every item to the kappa most
    similar other items (ties broken by ascending item index), then is
    symmetrized by element-wise maximum so each per-modality graph stays
    binary. The result averages the binary graphs with the configured
    per-modality weights.
    """
    if not features:
        raise ValueError("need at least one feature matrix")
    num_items = features[0].num_items
    if any(fm.num_items != num_items for fm in features):
        raise ValueError("feature matrices disagree on item count")
    if config.kappa == 0:
        return _empty(num_items, num_items)
    if config.kappa >= num_items:
        raise ValueError(f"kappa={config.kappa} needs at least {config.kappa + 1} items")

    total = _empty(num_items, num_items)
    for fm in features:
        weight = 1.0
        if config.modality_weights is not None:
            if fm.modality_name not in config.modality_weights:
                raise ValueError(f"no weight for modality {fm.modality_name!r}")
            weight = float(config.modality_weights[fm.modality_name])
        vals = fm.values.astype(np.float64)
        if config.similarity == "cosine":
            norms = np.linalg.norm(vals, axis=1)
            with np.errstate(divide="ignore"):
                inv = 1.0 / norms
            inv[~np.isfinite(inv)] = 0.0
            vals = vals * inv[:, None]
        sim = vals @ vals.T
        if np.isnan(sim).any():
            raise ValueError(f"NaN similarity in modality {fm.modality_name!r}")
        np.fill_diagonal(sim, -np.inf)
        # stable sort of -sim: descending similarity, ties -> ascending index
        top = np.argsort(-sim, axis=1, kind="stable")[:, :config.kappa]
        rows = np.repeat(np.arange(num_items), config.kappa)
        directed = sparse.coo_array(
            (np.ones(rows.size), (rows, top.ravel())), shape=(num_items, num_items)).tocsr()
        symmetric = directed.maximum(directed.T)
        total = total + (weight / len(features)) * symmetric
    return canonical_csr(total)


def assemble_augmented(bipartite: sparse.csr_array,
                       user_block=None, item_block=None) -> sparse.csr_array:
    """Insert side graphs into the diagonal blocks of the bipartite adjacency.

    ``user_block`` lands in the upper-left (user-user) corner and
    ``item_block`` in the lower-right (item-item) corner. Absent or empty
    blocks leave the input untouched, so disabling all side information
    returns the bipartite matrix itself.
    """
    n = bipartite.shape[0]
    if bipartite.shape[0] != bipartite.shape[1]:
        raise ValueError("bipartite adjacency must be square")
    for name, block in (("user", user_block), ("item", item_block)):
        if block is not None and (block.shape[0] != block.shape[1] or block.shape[0] > n):
            raise ValueError(f"{name} block {block.shape} does not fit into {n} nodes")
    if user_block is not None and item_block is not None \
            and user_block.shape[0] + item_block.shape[0] != n:
        raise ValueError("user and item blocks must partition the node set")

    out = bipartite
    if user_block is not None and user_block.nnz > 0:
        out = out + _embed_block(user_block, n, 0)
    if item_block is not None and item_block.nnz > 0:
        out = out + _embed_block(item_block, n, n - item_block.shape[0])
    return out if out is bipartite else canonical_csr(out)


def _embed_block(block, n, offset):
    coo = sparse.coo_array(block)
    return sparse.coo_array(
        (coo.data, (coo.row + offset, coo.col + offset)), shape=(n, n)).tocsr()


def sym_normalize(adjacency, num_users: int | None = None) -> NormalizedAdjacency:
    """D^{-1/2} A D^{-1/2} with D the diagonal of row sums.

    Zero-degree nodes get d^{-1/2} = 0, so their rows and columns stay zero
    instead of turning into NaN.
    """
    matrix = canonical_csr(adjacency)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("adjacency must be square")
    if matrix.nnz and matrix.data.min() < 0:
        raise ValueError("adjacency weights must be nonnegative")
    degrees = np.asarray(matrix.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        d_inv_sqrt = np.power(degrees, -0.5)
    d_inv_sqrt[~np.isfinite(d_inv_sqrt)] = 0.0
    scale = sparse.dia_array((d_inv_sqrt[None, :], [0]), shape=matrix.shape)
    normalized = canonical_csr(scale @ matrix @ scale)
    return NormalizedAdjacency(normalized, degrees, num_users)


def spmm(matrix, dense):
    """Sparse @ dense with float64 accumulation."""
    dense = np.asarray(dense, dtype=np.float64)
    if matrix.shape[1] != dense.shape[0]:
        raise ValueError(f"shape mismatch: {matrix.shape} @ {dense.shape}")
    return matrix @ dense


def graph_info(matrix) -> dict:
    """Dimension, nnz and degree statistics used by the CLI reporter."""
    deg = np.asarray(matrix.sum(axis=1)).ravel()
    return {
        "rows": int(matrix.shape[0]),
        "cols": int(matrix.shape[1]),
        "nnz": int(matrix.nnz),
        "degree_min": float(deg.min()) if deg.size else 0.0,
        "degree_max": float(deg.max()) if deg.size else 0.0,
        "degree_mean": float(deg.mean()) if deg.size else 0.0,
        "isolated_nodes": int(np.count_nonzero(deg == 0)),
    }


# --- binary container ------------------------------------------------------
# header: rows, cols, nnz as little-endian int64, then the CSR arrays:
# row offsets (rows+1 int64), column indices (nnz int64), values (nnz float64)

def save_graph(matrix, path) -> None:
    matrix = canonical_csr(matrix)
    with open(path, "wb") as fh:
        np.array([matrix.shape[0], matrix.shape[1], matrix.nnz], dtype="<i8").tofile(fh)
        matrix.indptr.astype("<i8").tofile(fh)
        matrix.indices.astype("<i8").tofile(fh)
        matrix.data.astype("<f8").tofile(fh)


def load_graph(path) -> sparse.csr_array:
    path = Path(path)
    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype="<i8", count=3)
        if header.size != 3:
            raise ValueError(f"{path}: truncated header")
        rows, cols, nnz = (int(v) for v in header)
        indptr = np.fromfile(fh, dtype="<i8", count=rows + 1)
        indices = np.fromfile(fh, dtype="<i8", count=nnz)
        values = np.fromfile(fh, dtype="<f8", count=nnz)
        trailing = fh.read(1)
    if indptr.size != rows + 1 or indices.size != nnz or values.size != nnz or trailing:
        raise ValueError(f"{path}: size does not match header")
    if indptr[0] != 0 or indptr[-1] != nnz or np.any(np.diff(indptr) < 0):
        raise ValueError(f"{path}: corrupt row offsets")
    return canonical_csr(
        sparse.csr_array((values, indices, indptr), shape=(rows, cols)))
