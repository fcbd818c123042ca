"""Eigenvalue machinery: factor estimation, the corrected operator, dense oracles.

The correction operator applies phi(A) = (A - mu*I) / delta lazily. ``mu`` and
``delta`` are estimated from the dominant eigenvalue of I - A found by plain
power iteration; because the largest eigenvalue of any symmetric sqrt-normalized
adjacency is exactly 1, the factor arithmetic is arranged so that
``mu + delta == 1`` and ``phi(lambda_min_est) == -1`` hold bitwise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .graph import (KnnConfig, NormalizedAdjacency, assemble_augmented,
                    build_bipartite, build_knn_graph, rescale_social,
                    sym_normalize)

DENSE_NODE_CAP = 4000


@dataclass(frozen=True)
class SscFactors:
    """Shifting factor mu and scaling factor delta with their eigenvalue basis."""

    mu: float
    delta: float
    lambda_min_est: float
    lambda_max: float = 1.0

    def apply_scalar(self, lam):
        """The scalar map phi(lambda) = (lambda - mu) / delta."""
        return (lam - self.mu) / self.delta


@dataclass(frozen=True)
class SpectrumReport:
    """Ascending eigenvalues and per-eigenvector importance for one kappa."""

    kappa: float
    eigenvalues: np.ndarray
    importance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=np.float64))
        object.__setattr__(self, "importance", np.asarray(self.importance, dtype=np.float64))
        if len(self.eigenvalues) != len(self.importance):
            raise ValueError("eigenvalues and importance must have equal length")

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


class ShiftedOperator:
    """Lazy phi(A)x = (Ax - mu*x) / delta over a normalized adjacency.

    mu = 0 skips the subtraction and delta = 1 skips the division, so the
    uncorrected operator is bitwise identical to plain propagation with A.
    """

    def __init__(self, base: NormalizedAdjacency, mu: float, delta: float):
        if delta <= 0:
            raise ValueError("delta must be > 0")
        self.base = base
        self.mu = float(mu)
        self.delta = float(delta)

    @property
    def shape(self):
        return self.base.matrix.shape

    def apply(self, x):
        y = self.base.matrix @ x
        if self.mu != 0.0:
            y = y - self.mu * x
        if self.delta != 1.0:
            y = y / self.delta
        return y

    def __matmul__(self, x):
        return self.apply(x)


def make_shifted_operator(adj: NormalizedAdjacency, mu: float, delta: float) -> ShiftedOperator:
    if not 0.0 <= mu <= 1.0:
        warnings.warn(f"mu={mu} outside [0, 1]; accepting (grid search may probe there)",
                      stacklevel=2)
    return ShiftedOperator(adj, mu, delta)


def power_iteration(op, num_iterations: int = 100, seed: int = 42) -> float:
    """Dominant (largest-magnitude) eigenvalue estimate of a symmetric operator.

    Iterates x <- Mx / ||Mx|| from a seeded random unit start and returns the
    final Rayleigh quotient x'Mx / x'x, so the sign of the dominant eigenvalue
    is preserved. If the operator annihilates the iterate at any step the
    estimate is 0.
    """
    if num_iterations < 1:
        raise ValueError("num_iterations must be >= 1")
    n = op.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    for _ in range(num_iterations):
        y = op @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
    y = op @ x
    return float(np.dot(x, y) / np.dot(x, x))


def estimate_factors(adj: NormalizedAdjacency, num_iterations: int = 100,
                     seed: int = 42) -> SscFactors:
    """Estimate mu and delta from the spectrum edge found by power iteration.

    Runs power iteration on the positive semidefinite complement I - A (applied
    lazily, never materialized) whose dominant eigenvalue is 1 - lambda_min,
    then places mu and delta at the midpoint and half-width of
    [lambda_min_est, 1]. ``delta = rho/2`` and ``mu = 1 - delta`` keep
    ``mu + delta == 1`` exact in floating point.
    """
    matrix = adj.matrix
    n = matrix.shape[0]
    complement = LinearOperator((n, n), matvec=lambda v: v - matrix @ v, dtype=np.float64)
    rho = power_iteration(complement, num_iterations=num_iterations, seed=seed)
    delta = rho / 2.0
    if delta <= 0.0:
        # I - A annihilated the iterate (A acts as the identity); no shift
        return SscFactors(mu=0.0, delta=1.0, lambda_min_est=1.0)
    mu = 1.0 - delta
    return SscFactors(mu=mu, delta=delta, lambda_min_est=1.0 - rho)


def dense_spectrum(adj, node_cap: int = DENSE_NODE_CAP):
    """Full symmetric eigendecomposition, ascending; desk-scale oracle only."""
    matrix = adj.matrix if isinstance(adj, NormalizedAdjacency) else adj
    n = matrix.shape[0]
    if n > node_cap:
        raise ValueError(
            f"{n} nodes exceeds the dense-spectrum cap of {node_cap}; "
            "use power_iteration for large instances")
    dense = matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix, dtype=np.float64)
    return np.linalg.eigh(dense)


def rayleigh_importance(eigenvectors, test_graph) -> np.ndarray:
    """|x' B x| / x'x for each eigenvector column x against the test graph B."""
    u = np.asarray(eigenvectors, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    denom = np.einsum("ij,ij->j", u, u)
    if np.any(denom == 0.0):
        raise ValueError("zero eigenvector passed to rayleigh_importance")
    numer = np.abs(np.einsum("ij,ij->j", u, test_graph @ u))
    return numer / denom


def spectrum_shift_report(dataset, kappas, social_edges=None, features=None,
                          knn_config: KnnConfig | None = None,
                          node_cap: int = DENSE_NODE_CAP) -> list[SpectrumReport]:
    """Dense spectrum plus test-graph importance for each side-info intensity.

    Exactly one side-information source must be given. For a social graph the
    kappa values are edge-weight rescales; for multimodal features they are
    neighbor counts. Importance is measured against the bipartite graph built
    from the dataset's test pairs, marking the frequencies that carry held-out
    signal.
    """
    if (social_edges is None) == (features is None):
        raise ValueError("provide exactly one of social_edges or features")
    bipartite = build_bipartite(dataset.train, dataset.num_users, dataset.num_items)
    test_graph = build_bipartite(dataset.test, dataset.num_users, dataset.num_items)
    reports = []
    for kappa in kappas:
        if social_edges is not None:
            aug = assemble_augmented(bipartite, user_block=rescale_social(social_edges, kappa))
        else:
            base = knn_config or KnnConfig(kappa=0)
            cfg = KnnConfig(kappa=int(kappa), modality_weights=base.modality_weights,
                            similarity=base.similarity)
            aug = assemble_augmented(bipartite, item_block=build_knn_graph(features, cfg))
        normalized = sym_normalize(aug, num_users=dataset.num_users)
        eigenvalues, eigenvectors = dense_spectrum(normalized, node_cap=node_cap)
        importance = rayleigh_importance(eigenvectors, test_graph)
        reports.append(SpectrumReport(float(kappa), eigenvalues, importance))
    return reports
