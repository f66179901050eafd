"""Sobolev cubatures: differentiation matrices and discrete H^k norms.

The order-k cubature weight matrix is assembled as
``W_k = sum_{|beta| <= k} (D^beta)^T W D^beta`` with W the diagonal Legendre
weight matrix, so ``u^T W_k u`` approximates the squared H^k norm of the
interpolant of ``u``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from gradpde.basis import barycentric_weights
from gradpde.grid import BoundaryGrid, TensorGrid

DEFAULT_MAX_ORDER = 4


class CubatureError(ValueError):
    """Invalid cubature construction request."""


@dataclass(frozen=True, eq=False)
class CubatureOperator:
    """Differentiation matrices and Sobolev weight matrix for one grid."""

    grid: TensorGrid
    order: int
    W: np.ndarray  # diagonal entries (the tensor quadrature weights)
    diff: dict  # multi-index beta -> dense D^beta
    Wk: np.ndarray  # dense symmetric PSD

    @cached_property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.Wk)[0])


def diff_matrix_1d(nodes: np.ndarray) -> np.ndarray:
    """Polynomial differentiation matrix on distinct 1-D nodes.

    Built from barycentric weights; ``(D q)_i`` is the derivative at node i of
    the unique interpolating polynomial of the values q, so D is exact on
    polynomials up to the grid degree and rows sum to zero.
    """
    nodes = np.asarray(nodes, dtype=float)
    w = barycentric_weights(nodes)  # raises on duplicates
    m = len(nodes)
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (nodes[i] - nodes[j])
    np.fill_diagonal(D, -np.sum(D, axis=1))
    return D


def diff_matrix(
    beta: tuple[int, ...], grid: TensorGrid, max_order: int = DEFAULT_MAX_ORDER
) -> np.ndarray:
    """Kronecker-structured tensor differentiation matrix D^beta.

    Axis factors are powers of the 1-D matrix; the Kronecker order matches the
    lexicographic node ordering (first axis most significant).
    """
    beta = tuple(int(b) for b in beta)
    if len(beta) != grid.dim:
        raise CubatureError(f"beta {beta} does not match dimension {grid.dim}")
    if any(b < 0 for b in beta):
        raise CubatureError(f"negative derivative order in {beta}")
    if sum(beta) > max_order:
        raise CubatureError(f"derivative order {sum(beta)} exceeds cap {max_order}")
    D1 = _axis_diff(grid)
    out = np.linalg.matrix_power(D1, beta[0])
    for b in beta[1:]:
        out = np.kron(out, np.linalg.matrix_power(D1, b))
    return out


@lru_cache(maxsize=128)
def _axis_diff_cached(degree: int) -> np.ndarray:
    from gradpde.grid import legendre_nodes_weights

    nodes, _ = legendre_nodes_weights(degree + 1)
    D = diff_matrix_1d(nodes)
    D.flags.writeable = False
    return D


def _axis_diff(grid: TensorGrid) -> np.ndarray:
    return _axis_diff_cached(grid.degree)


def sobolev_weight_matrix(
    grid: TensorGrid, k: int, max_order: int = DEFAULT_MAX_ORDER
) -> CubatureOperator:
    """Assemble the order-k cubature operator over all |beta| <= k (total order)."""
    if k < 0:
        raise CubatureError(f"Sobolev order must be non-negative, got {k}")
    if k > max_order:
        raise CubatureError(f"Sobolev order {k} exceeds cap {max_order}")
    d = grid.dim
    W = np.asarray(grid.weights)
    diff = {}
    Wk = np.zeros((grid.size, grid.size))
    for beta in itertools.product(range(k + 1), repeat=d):
        if sum(beta) > k:
            continue
        D = diff_matrix(beta, grid, max_order=max_order)
        diff[beta] = D
        Wk += D.T @ (W[:, None] * D)
    Wk = 0.5 * (Wk + Wk.T)
    return CubatureOperator(grid=grid, order=k, W=W, diff=diff, Wk=Wk)


def sobolev_norm_sq(u_values: np.ndarray, op: CubatureOperator) -> float:
    """Discrete squared H^k norm ``u^T W_k u`` of node values."""
    u = np.asarray(u_values, dtype=float).reshape(-1)
    if u.shape[0] != op.grid.size:
        raise CubatureError(
            f"value vector length {u.shape[0]} does not match grid size {op.grid.size}"
        )
    return float(u @ op.Wk @ u)


def boundary_weight_matrix(bgrid: BoundaryGrid, n_scale: float) -> np.ndarray:
    """Diagonal of boundary quadrature weights scaled by ``n_scale``.

    The scale implements the surrogate H^{1/2} boundary term as a degree-
    weighted L^2 cubature on the boundary grid.
    """
    if n_scale < 0:
        raise CubatureError(f"n_scale must be non-negative, got {n_scale}")
    return n_scale * np.asarray(bgrid.weights)
