"""Chebyshev and Lagrange polynomial bases of l-infinity degree n.

Surrogates are coefficient vectors in a named basis; Vandermonde matrices
evaluate whole bases at point sets.  Lagrange evaluation uses the barycentric
form for stability at high degree.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from gradpde.grid import MultiIndexSet, TensorGrid, multi_index_set, tensor_grid

CHEBYSHEV = "chebyshev"
LAGRANGE = "lagrange"

_COND_LIMIT = 1e12


class BasisError(ValueError):
    """Invalid basis request or ill-conditioned basis change."""


class EvaluationError(RuntimeError):
    """A user-supplied field failed to evaluate at a grid node."""


@dataclass(frozen=True, eq=False)
class Surrogate:
    """A polynomial of l-infinity degree n in a named basis.

    ``coeffs[i]`` multiplies the basis function addressed by
    ``index_set.indices[i]``.  Lagrange surrogates keep a reference to the
    grid whose cardinal functions they expand in; their coefficients are the
    point values at the grid nodes.
    """

    basis: str
    index_set: MultiIndexSet
    coeffs: np.ndarray
    grid: TensorGrid | None = None

    def __post_init__(self):
        if self.basis not in (CHEBYSHEV, LAGRANGE):
            raise BasisError(f"unknown basis {self.basis!r}")
        if self.basis == LAGRANGE and self.grid is None:
            raise BasisError("a Lagrange surrogate needs its grid")
        if len(self.coeffs) != len(self.index_set):
            raise BasisError(
                f"coefficient length {len(self.coeffs)} does not match "
                f"index set cardinality {len(self.index_set)}"
            )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (N, d); returns values of shape (N,)."""
        V = vandermonde(self.basis, self.index_set, points, grid=self.grid)
        return V.matrix @ np.asarray(self.coeffs)


@dataclass(frozen=True, eq=False)
class Vandermonde:
    """Dense matrix with entry (i, alpha) = basis function alpha at point i."""

    basis: str
    points: np.ndarray
    index_set: MultiIndexSet
    matrix: np.ndarray

    @cached_property
    def cond(self) -> float:
        if self.matrix.shape[0] != self.matrix.shape[1]:
            return float("inf")
        return float(np.linalg.cond(self.matrix))


def chebyshev_eval(alpha: tuple[int, ...], x: np.ndarray) -> float:
    """Product of first-kind Chebyshev polynomials T_{alpha_i}(x_i).

    Uses the three-term recurrence T_{k+1} = 2 x T_k - T_{k-1}; points outside
    [-1, 1] are accepted and extrapolate.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = 1.0
    for k, xi in zip(alpha, x):
        out *= _cheb_1d(k, xi)
    return float(out)


def _cheb_1d(k: int, x):
    if k == 0:
        return np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    tkm1, tk = 1.0, x
    for _ in range(k - 1):
        tkm1, tk = tk, 2.0 * x * tk - tkm1
    return tk


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights w_i = 1 / prod_{j != i} (x_i - x_j) of the barycentric form."""
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise BasisError("duplicate interpolation nodes")
    w = 1.0 / np.prod(diff, axis=1)
    return w


def _cardinal_table(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """All 1-D Lagrange cardinals at points x; shape (len(x), len(nodes))."""
    w = barycentric_weights(nodes)
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - nodes[None, :]
    exact_pt, exact_node = np.nonzero(diff == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = w[None, :] / diff
        table = terms / np.sum(terms, axis=1, keepdims=True)
    table[exact_pt, :] = 0.0
    table[exact_pt, exact_node] = 1.0
    return table


def lagrange_eval(
    alpha: tuple[int, ...], grid: TensorGrid, x: np.ndarray
) -> float:
    """Tensor-product Lagrange cardinal for multi-index ``alpha`` at point x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = 1.0
    for k, xi in zip(alpha, x):
        out *= _cardinal_table(grid.axis_nodes, np.array([xi]))[0, k]
    return float(out)


def vandermonde(
    basis: str,
    index_set: MultiIndexSet,
    points: np.ndarray,
    grid: TensorGrid | None = None,
) -> Vandermonde:
    """Evaluate a whole basis at a point set.

    Rows follow the points as given; columns follow the lexicographic index
    order, so square systems line up with grid node ordering.
    """
    points = np.asarray(points, dtype=float).reshape(-1, index_set.d)
    npts = points.shape[0]
    n = index_set.n
    if basis == CHEBYSHEV:
        # per-axis tables T_k(x_i) for k = 0..n, combined per multi-index
        tables = []
        for ax in range(index_set.d):
            t = np.empty((npts, n + 1))
            xi = points[:, ax]
            t[:, 0] = 1.0
            if n >= 1:
                t[:, 1] = xi
            for k in range(2, n + 1):
                t[:, k] = 2.0 * xi * t[:, k - 1] - t[:, k - 2]
            tables.append(t)
    elif basis == LAGRANGE:
        if grid is None:
            raise BasisError("Lagrange Vandermonde needs the grid")
        tables = [
            _cardinal_table(grid.axis_nodes, points[:, ax])
            for ax in range(index_set.d)
        ]
    else:
        raise BasisError(f"unknown basis {basis!r}")
    matrix = np.empty((npts, len(index_set)))
    for col, alpha in enumerate(index_set.indices):
        entry = tables[0][:, alpha[0]].copy()
        for ax in range(1, index_set.d):
            entry *= tables[ax][:, alpha[ax]]
        matrix[:, col] = entry
    return Vandermonde(basis=basis, points=points, index_set=index_set, matrix=matrix)


def interpolate(h, n: int, d: int = 1) -> Surrogate:
    """Lagrange interpolant of a field on the degree-n Legendre grid.

    The coefficient vector is exactly the node values, so the interpolant
    reproduces ``h`` at the grid nodes to machine precision.
    """
    grid = tensor_grid(n, d)
    try:
        with warnings.catch_warnings():
            # a scalar-only callable misreads the (N, d) batch; treat the
            # resulting deprecation noise as a failure and go pointwise
            warnings.simplefilter("error", DeprecationWarning)
            values = np.asarray(h(grid.nodes), dtype=float).reshape(-1)
    except Exception:
        values = _evaluate_pointwise(h, grid.nodes)
    if values.shape[0] != grid.size:
        values = _evaluate_pointwise(h, grid.nodes)
    return Surrogate(
        basis=LAGRANGE, index_set=multi_index_set(n, d), coeffs=values, grid=grid
    )


def _evaluate_pointwise(h, nodes: np.ndarray) -> np.ndarray:
    values = np.empty(nodes.shape[0])
    for i, p in enumerate(nodes):
        try:
            values[i] = float(np.asarray(h(p)).reshape(()))
        except Exception as exc:
            raise EvaluationError(f"field evaluation failed at node {p}") from exc
    return values


def cheb_project(h, n: int, quad_degree: int, d: int = 1) -> Surrogate:
    """Chebyshev projection coefficients via Gauss-Chebyshev quadrature.

    Coefficients approximate the weighted integrals of ``h`` against T_alpha
    under the Chebyshev weight; the normalization halves per axis with
    alpha_i = 0 so constants are reproduced exactly.  Requires an oversampled
    rule, ``quad_degree >= 2 n``.
    """
    if quad_degree < 2 * n:
        raise BasisError(f"quad_degree {quad_degree} must be at least 2n = {2 * n}")
    mq = quad_degree + 1
    j = np.arange(mq)
    xq = np.cos((2.0 * j + 1.0) * np.pi / (2.0 * mq))
    # 1-D analysis matrix: row k maps samples to the k-th coefficient
    tk = np.empty((n + 1, mq))
    tk[0] = 1.0
    if n >= 1:
        tk[1] = xq
    for k in range(2, n + 1):
        tk[k] = 2.0 * xq * tk[k - 1] - tk[k - 2]
    scale = np.full(n + 1, 2.0 / mq)
    scale[0] = 1.0 / mq
    analysis = tk * scale[:, None]

    mesh = np.meshgrid(*([xq] * d), indexing="ij")
    pts = np.stack([c.reshape(-1) for c in mesh], axis=-1)
    try:
        vals = np.asarray(h(pts), dtype=float).reshape(-1)
        if vals.shape[0] != pts.shape[0]:
            raise ValueError
    except Exception:
        vals = _evaluate_pointwise(h, pts)
    tensor = vals.reshape((mq,) * d)
    for ax in range(d):
        tensor = np.tensordot(analysis, tensor, axes=([1], [ax]))
        tensor = np.moveaxis(tensor, 0, ax)
    coeffs = tensor.reshape(-1)
    return Surrogate(basis=CHEBYSHEV, index_set=multi_index_set(n, d), coeffs=coeffs)


def change_basis(s: Surrogate, target: str) -> Surrogate:
    """Re-express a surrogate over the same index set in another basis.

    Point values at the grid nodes are preserved; Lagrange -> Chebyshev
    solves the square Chebyshev Vandermonde system on the grid.
    """
    if target not in (CHEBYSHEV, LAGRANGE):
        raise BasisError(f"unknown basis {target!r}")
    if s.basis == target:
        return s
    n, d = s.index_set.n, s.index_set.d
    grid = s.grid if s.grid is not None else tensor_grid(n, d)
    V = vandermonde(CHEBYSHEV, s.index_set, grid.nodes)
    if target == LAGRANGE:
        values = V.matrix @ np.asarray(s.coeffs)
        return Surrogate(basis=LAGRANGE, index_set=s.index_set, coeffs=values, grid=grid)
    if V.cond > _COND_LIMIT:
        raise BasisError(
            f"Chebyshev Vandermonde condition {V.cond:.3e} exceeds {_COND_LIMIT:.0e}"
        )
    theta = np.linalg.solve(V.matrix, np.asarray(s.coeffs))
    return Surrogate(basis=CHEBYSHEV, index_set=s.index_set, coeffs=theta)
