"""Legendre grids on the hypercube (-1, 1)^d.

Multi-index sets address tensor-product basis functions and grid nodes; the
1-D Gauss-Legendre rule is tensorized into interior grids, boundary-face
grids, and quadrature sample sets on embedded manifolds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

if TYPE_CHECKING:
    from gradpde.oracles import ManifoldDescriptor

DEFAULT_NODE_CAP = 10**6


class GridError(ValueError):
    """Invalid grid construction request."""


class EigenSolverError(RuntimeError):
    """The symmetric tridiagonal eigensolver failed to converge."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    """Lexicographically ordered multi-indices of l-infinity degree <= n."""

    n: int
    d: int
    indices: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.indices)

    def position(self, alpha: tuple[int, ...]) -> int:
        """Stable address of a tuple; inverse of ``indices[pos]``."""
        m = self.n + 1
        pos = 0
        for a in alpha:
            pos = pos * m + a
        return pos


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Tensor-product Gauss-Legendre grid with product quadrature weights.

    Node ordering matches ``multi_index_set(degree, dim)``: the node addressed
    by the multi-index alpha is ``(axis_nodes[alpha_1], ..., axis_nodes[alpha_d])``.
    """

    dim: int
    degree: int
    nodes: np.ndarray  # ((degree+1)^dim, dim)
    weights: np.ndarray  # ((degree+1)^dim,)
    axis_nodes: np.ndarray  # (degree+1,)
    axis_weights: np.ndarray  # (degree+1,)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


@dataclass(frozen=True, eq=False)
class BoundaryFace:
    """One hypercube face: nodes embedded at coordinate ``side`` on ``axis``."""

    axis: int
    side: int  # -1 or +1
    nodes: np.ndarray  # (k, d)
    weights: np.ndarray  # (k,)


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """All 2*d faces of the hypercube boundary with quadrature weights."""

    dim: int
    degree: int
    faces: tuple[BoundaryFace, ...]
    nodes: np.ndarray = field(repr=False)  # concatenated over faces
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


@dataclass(frozen=True, eq=False)
class ManifoldSamples:
    """Quadrature points on a co-dimension-one sample manifold inside the cube."""

    descriptor: "ManifoldDescriptor"
    points: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)


@lru_cache(maxsize=256)
def multi_index_set(n: int, d: int) -> MultiIndexSet:
    """Build the ordered multi-index set of degree ``n`` in dimension ``d``.

    Tuples are strictly increasing in lexicographic order; the position of a
    tuple is the address used by every matrix-valued operation downstream.
    """
    if d < 1:
        raise GridError(f"dimension must be positive, got d={d}")
    if n < 0:
        raise GridError(f"degree must be non-negative, got n={n}")
    indices = tuple(itertools.product(range(n + 1), repeat=d))
    return MultiIndexSet(n=n, d=d, indices=indices)


@lru_cache(maxsize=256)
def legendre_nodes_weights(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on (-1, 1) via the Jacobi matrix.

    The nodes are the eigenvalues of the symmetric tridiagonal matrix with
    zero diagonal and off-diagonal entries ``beta_i = i / sqrt((2i-1)(2i+1))``;
    the weight at node i is twice the squared first component of the
    corresponding normalized eigenvector.  Nodes are sorted ascending and
    symmetrized about zero for reproducibility.
    """
    if m < 1:
        raise GridError(f"need at least one node, got m={m}")
    if m == 1:
        return _readonly(np.array([0.0])), _readonly(np.array([2.0]))
    i = np.arange(1, m)
    beta = i / np.sqrt((2.0 * i - 1.0) * (2.0 * i + 1.0))
    try:
        vals, vecs = scipy.linalg.eigh_tridiagonal(np.zeros(m), beta)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"tridiagonal eigensolve failed for m={m}") from exc
    order = np.argsort(vals)
    nodes = vals[order]
    weights = 2.0 * vecs[0, order] ** 2
    # enforce exact +/- symmetry of the rule
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if m % 2 == 1:
        nodes[m // 2] = 0.0
    return _readonly(nodes), _readonly(weights)


@lru_cache(maxsize=128)
def tensor_grid(n: int, d: int, max_nodes: int = DEFAULT_NODE_CAP) -> TensorGrid:
    """Tensor-product Legendre grid of degree ``n`` in dimension ``d``."""
    if d < 1:
        raise GridError(f"dimension must be positive, got d={d}")
    if n < 0:
        raise GridError(f"degree must be non-negative, got n={n}")
    m = n + 1
    if m**d > max_nodes:
        raise GridError(f"grid size {m}^{d} exceeds the node cap {max_nodes}")
    axis_nodes, axis_weights = legendre_nodes_weights(m)
    mesh = np.meshgrid(*([axis_nodes] * d), indexing="ij")
    nodes = np.stack([c.reshape(-1) for c in mesh], axis=-1)
    wmesh = np.meshgrid(*([axis_weights] * d), indexing="ij")
    weights = np.ones(m**d)
    for w in wmesh:
        weights *= w.reshape(-1)
    return TensorGrid(
        dim=d,
        degree=n,
        nodes=_readonly(nodes),
        weights=_readonly(weights),
        axis_nodes=axis_nodes,
        axis_weights=axis_weights,
    )


@lru_cache(maxsize=128)
def boundary_grid(n: int, d: int) -> BoundaryGrid:
    """Quadrature grid on the hypercube boundary, one face per (axis, side).

    Each face carries the (d-1)-dimensional Legendre rule embedded at
    coordinate +/-1; for d = 1 the faces are the endpoints with weight 1.
    """
    if d < 1:
        raise GridError(f"dimension must be positive, got d={d}")
    faces = []
    for axis in range(d):
        for side in (-1, 1):
            if d == 1:
                fnodes = np.array([[float(side)]])
                fweights = np.array([1.0])
            else:
                face_grid = tensor_grid(n, d - 1)
                k = face_grid.size
                fnodes = np.empty((k, d))
                other = [a for a in range(d) if a != axis]
                fnodes[:, other] = face_grid.nodes
                fnodes[:, axis] = float(side)
                fweights = np.array(face_grid.weights)
            faces.append(
                BoundaryFace(
                    axis=axis,
                    side=side,
                    nodes=_readonly(fnodes),
                    weights=_readonly(fweights),
                )
            )
    nodes = np.concatenate([f.nodes for f in faces], axis=0)
    weights = np.concatenate([f.weights for f in faces])
    return BoundaryGrid(
        dim=d,
        degree=n,
        faces=tuple(faces),
        nodes=_readonly(nodes),
        weights=_readonly(weights),
    )


def manifold_samples(descriptor: "ManifoldDescriptor", m: int) -> ManifoldSamples:
    """Quadrature points with weights on a supported sample manifold.

    Weights sum to the (d-1)-measure of the manifold; point manifolds carry a
    single unit weight.
    """
    if m < 1:
        raise GridError(f"need at least one sample, got m={m}")
    d = descriptor.dim
    if descriptor.kind == "point":
        if m != 1:
            raise GridError("a point manifold admits exactly one sample")
        points = np.array([descriptor.location], dtype=float)
        weights = np.array([1.0])
    elif descriptor.kind == "l1_sphere":
        if d != 2:
            raise GridError("l1-sphere samples are supported in d=2 only")
        cx, cy = descriptor.center
        r = descriptor.radius
        # midpoint rule on the uniform parametrization of the diamond
        t = (np.arange(m) + 0.5) / m * 4.0
        points = np.empty((m, 2))
        for i, ti in enumerate(t):
            seg, s = int(ti), ti - int(ti)
            if seg == 0:  # (+r,0) -> (0,+r)
                p = (r - s * r, s * r)
            elif seg == 1:  # (0,+r) -> (-r,0)
                p = (-s * r, r - s * r)
            elif seg == 2:  # (-r,0) -> (0,-r)
                p = (-r + s * r, -s * r)
            else:  # (0,-r) -> (+r,0)
                p = (s * r, -r + s * r)
            points[i] = (cx + p[0], cy + p[1])
        perimeter = 4.0 * np.sqrt(2.0) * r
        weights = np.full(m, perimeter / m)
    elif descriptor.kind == "axis_hyperplane":
        if d == 1:
            if m != 1:
                raise GridError("a hyperplane in d=1 is a point; use m=1")
            points = np.array([[descriptor.offset]])
            weights = np.array([1.0])
        elif d == 2:
            tnodes, tweights = legendre_nodes_weights(m)
            points = np.empty((m, 2))
            other = 1 - descriptor.axis
            points[:, descriptor.axis] = descriptor.offset
            points[:, other] = tnodes
            weights = np.array(tweights)
        else:
            raise GridError("hyperplane samples are supported for d <= 2")
    else:
        raise GridError(f"unsupported manifold kind {descriptor.kind!r}")
    return ManifoldSamples(
        descriptor=descriptor, points=_readonly(points), weights=_readonly(weights)
    )
