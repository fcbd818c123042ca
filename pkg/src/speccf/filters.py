"""Polynomial graph filters applied spatially via repeated operator matvecs.

Two filter families: uniform monomial averaging (the LightGCN aggregation
g(x) = sum_l x^l / (L+1)) and a Jacobi-basis band-stop filter (the JGCF
aggregation g(x) = sum_l P_l^{a,b}(x) / (L+1)). Both run over either a plain
normalized adjacency or a shift/scale-corrected operator; a dense
spectral-domain reference implementation serves as the test oracle.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

FILTER_KINDS = ("lightgcn", "jgcf")


@dataclass(frozen=True)
class FilterSpec:
    """Filter family, depth, and (for the Jacobi family) shape parameters."""

    kind: str
    num_layers: int
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"kind must be one of {FILTER_KINDS}, got {self.kind!r}")
        if self.num_layers < 0:
            raise ValueError("num_layers must be >= 0")
        if self.kind == "jgcf" and (self.a <= -1 or self.b <= -1):
            raise ValueError("Jacobi shape parameters must satisfy a, b > -1")

    @property
    def layer_weight(self) -> float:
        return 1.0 / (self.num_layers + 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        return cls(**d)


def jacobi_coefficients(a: float, b: float, l: int):
    """Three-term recurrence coefficients (theta, theta', theta'') for degree l.

    The recurrence P_l(x) = (theta*x + theta')*P_{l-1}(x) - theta''*P_{l-2}(x)
    together with P_0 = 1 and P_1 = (a-b)/2 + (a+b+2)x/2 reproduces the
    classical Jacobi polynomials.
    """
    if l < 2:
        raise ValueError("recurrence coefficients are defined for l >= 2")
    if a <= -1 or b <= -1:
        raise ValueError("Jacobi shape parameters must satisfy a, b > -1")
    s = a + b
    if 2 * l + s - 2 == 0 or l + s == 0:
        raise ValueError(f"degenerate Jacobi parameters: a={a}, b={b}, l={l}")
    theta = (2 * l + s) * (2 * l + s - 1) / (2 * l * (l + s))
    theta_prime = (2 * l + s - 1) * (a * a - b * b) / (2 * l * (l + s) * (2 * l + s - 2))
    theta_dprime = (l + a - 1) * (l + b - 1) * (2 * l + s) / (l * (l + s) * (2 * l + s - 2))
    return theta, theta_prime, theta_dprime


def _check_dims(op, embeddings):
    if op.shape[1] != embeddings.shape[0]:
        raise ValueError(f"operator {op.shape} does not match embeddings "
                         f"{embeddings.shape}")


def lightgcn_propagate(op, embeddings, num_layers: int) -> np.ndarray:
    """H = sum_{l=0..L} op^l E / (L+1) via a running sum of matvecs."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    _check_dims(op, embeddings)
    if num_layers < 0:
        raise ValueError("num_layers must be >= 0")
    total = embeddings.copy()
    current = embeddings
    for _ in range(num_layers):
        current = op @ current
        total += current
    return total / (num_layers + 1)


def jgcf_propagate(op, embeddings, num_layers: int, a: float, b: float) -> np.ndarray:
    """H = sum_{l=0..L} P_l^{a,b}(op) E / (L+1) via the matrix recurrence."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    _check_dims(op, embeddings)
    if num_layers < 0:
        raise ValueError("num_layers must be >= 0")
    if a <= -1 or b <= -1:
        raise ValueError("Jacobi shape parameters must satisfy a, b > -1")
    prev = embeddings  # P_0(op) E
    total = embeddings.copy()
    if num_layers >= 1:
        current = ((a - b) / 2) * embeddings + ((a + b + 2) / 2) * (op @ embeddings)
        total += current
        for l in range(2, num_layers + 1):
            theta, theta_prime, theta_dprime = jacobi_coefficients(a, b, l)
            nxt = theta * (op @ current) + theta_prime * current - theta_dprime * prev
            prev, current = current, nxt
            total += current
    return total / (num_layers + 1)


def propagate(op, embeddings, spec: FilterSpec) -> np.ndarray:
    """Dispatch to the filter family named by the spec."""
    if spec.kind == "lightgcn":
        return lightgcn_propagate(op, embeddings, spec.num_layers)
    return jgcf_propagate(op, embeddings, spec.num_layers, spec.a, spec.b)


def filter_response(spec: FilterSpec, x) -> np.ndarray:
    """Scalar frequency response g(x) of the filter, vectorized over x."""
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "lightgcn":
        total = np.ones_like(x)
        term = np.ones_like(x)
        for _ in range(spec.num_layers):
            term = term * x
            total += term
    else:
        prev = np.ones_like(x)
        total = np.ones_like(x)
        if spec.num_layers >= 1:
            current = (spec.a - spec.b) / 2 + (spec.a + spec.b + 2) / 2 * x
            total = total + current
            for l in range(2, spec.num_layers + 1):
                theta, theta_prime, theta_dprime = jacobi_coefficients(spec.a, spec.b, l)
                prev, current = current, (theta * x + theta_prime) * current - theta_dprime * prev
                total = total + current
    return total / (spec.num_layers + 1)


def spectral_reference_propagate(eigenvectors, eigenvalues, spec: FilterSpec,
                                 factors, embeddings) -> np.ndarray:
    """Dense oracle: H = U diag(g(phi(lambda))) U' E.

    ``factors`` may be None for uncorrected propagation. Desk scale only --
    requires the full eigendecomposition.
    """
    u = np.asarray(eigenvectors, dtype=np.float64)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if factors is not None:
        lam = factors.apply_scalar(lam)
    gains = filter_response(spec, lam)
    return u @ (gains[:, None] * (u.T @ np.asarray(embeddings, dtype=np.float64)))
