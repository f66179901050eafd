"""Variational losses over surrogate coefficients: reconstruction, Poisson, Eikonal.

Each loss is a cubature-discretized functional of the coefficient vector
theta, with value, gradient, and the flow constants (coercivity sigma and
gradient Lipschitz bound L) needed by the gradient-flow engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from gradpde.basis import CHEBYSHEV, LAGRANGE, vandermonde
from gradpde.cubature import (
    boundary_weight_matrix,
    diff_matrix,
    sobolev_weight_matrix,
)
from gradpde.grid import (
    boundary_grid,
    manifold_samples,
    multi_index_set,
    tensor_grid,
)
from gradpde.oracles import ManifoldDescriptor

RECONSTRUCTION = "reconstruction"
POISSON = "poisson"
EIKONAL = "eikonal"


class LossError(ValueError):
    """Inconsistent loss problem or evaluation request."""


@dataclass(frozen=True)
class LossProblem:
    """One variational problem over the degree-n surrogate space.

    ``data`` is the interior field: the reconstruction target h or the Poisson
    source f (callable over point arrays of shape (N, d)).  ``boundary_data``
    is the Dirichlet trace g for Poisson.  ``manifold`` carries the zero-set S
    for the Eikonal loss.  ``boundary_scale`` defaults to the degree n, the
    factor weighting the boundary L^2 term.  ``basis`` selects the surrogate
    parameterization (Chebyshev coefficients by default; Lagrange makes the
    interior Vandermonde the identity).
    """

    kind: str
    degree: int
    dim: int
    sobolev_order: int = 0
    data: Callable | None = None
    boundary_data: Callable | None = None
    manifold: ManifoldDescriptor | None = None
    manifold_points: int | None = None
    boundary_scale: float | None = None
    basis: str = CHEBYSHEV
    squared: bool = True

    def __post_init__(self):
        if self.kind not in (RECONSTRUCTION, POISSON, EIKONAL):
            raise LossError(f"unknown loss kind {self.kind!r}")
        if self.kind == EIKONAL and self.manifold is None:
            raise LossError("the Eikonal loss needs a manifold")
        if self.kind in (POISSON, EIKONAL) and self.scale <= 0:
            raise LossError("boundary_scale must be positive")
        if self.manifold is not None and self.manifold.dim != self.dim:
            raise LossError("manifold dimension does not match the problem")

    @property
    def scale(self) -> float:
        if self.boundary_scale is not None:
            return float(self.boundary_scale)
        return float(max(self.degree, 1))

    @property
    def n_params(self) -> int:
        return (self.degree + 1) ** self.dim


@dataclass(frozen=True)
class LossEval:
    """Loss value with gradient and the interior/boundary breakdown."""

    value: float
    gradient: np.ndarray
    parts: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FlowConstants:
    """Coercivity modulus, gradient Lipschitz bound, and Euler contraction."""

    sigma: float
    lipschitz: float
    contraction: float
    lipschitz_inf: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and np.isfinite(self.lipschitz)):
            raise LossError("non-finite flow constants")
        if self.sigma > self.lipschitz * (1 + 1e-12):
            raise LossError(f"sigma {self.sigma} exceeds Lipschitz bound {self.lipschitz}")


@dataclass(frozen=True, eq=False)
class _Assembly:
    """Matrices and data vectors shared by all evaluations of one problem."""

    grid: object
    V: np.ndarray  # interior Vandermonde (basis functions at grid nodes)
    w: np.ndarray  # interior quadrature weights (diagonal)
    Ws: np.ndarray | None = None  # Sobolev weight matrix (reconstruction)
    h: np.ndarray | None = None  # target values at nodes (reconstruction)
    D_lap: np.ndarray | None = None  # Laplacian differentiation matrix
    f: np.ndarray | None = None  # source values at nodes (poisson)
    Vb: np.ndarray | None = None  # Vandermonde at boundary nodes
    wb: np.ndarray | None = None  # scaled boundary weights
    g: np.ndarray | None = None  # boundary data at boundary nodes
    D_ax: tuple | None = None  # per-axis first-derivative matrices (eikonal)
    Vs: np.ndarray | None = None  # Vandermonde at manifold samples
    ws: np.ndarray | None = None  # scaled manifold weights


def _eval_field(fn, points: np.ndarray) -> np.ndarray:
    if fn is None:
        return np.zeros(points.shape[0])
    vals = np.asarray(fn(points), dtype=float).reshape(-1)
    if vals.shape[0] != points.shape[0]:
        raise LossError("data callable returned a wrong-sized vector")
    return vals


def _interior_vandermonde(problem: LossProblem, grid, points: np.ndarray) -> np.ndarray:
    idx = multi_index_set(problem.degree, problem.dim)
    if problem.basis == LAGRANGE:
        return vandermonde(LAGRANGE, idx, points, grid=grid).matrix
    return vandermonde(CHEBYSHEV, idx, points).matrix


@lru_cache(maxsize=64)
def assemble(problem: LossProblem) -> _Assembly:
    """Build and cache the cubature matrices for a problem."""
    n, d = problem.degree, problem.dim
    grid = tensor_grid(n, d)
    V = _interior_vandermonde(problem, grid, grid.nodes)
    w = np.asarray(grid.weights)
    if problem.kind == RECONSTRUCTION:
        op = sobolev_weight_matrix(grid, problem.sobolev_order)
        h = _eval_field(problem.data, grid.nodes)
        return _Assembly(grid=grid, V=V, w=w, Ws=op.Wk, h=h)
    if problem.kind == POISSON:
        ei = lambda ax: tuple(2 if a == ax else 0 for a in range(d))
        D_lap = sum(diff_matrix(ei(ax), grid) for ax in range(d))
        f = _eval_field(problem.data, grid.nodes)
        bgrid = boundary_grid(n, d)
        Vb = _interior_vandermonde(problem, grid, bgrid.nodes)
        wb = boundary_weight_matrix(bgrid, problem.scale)
        g = _eval_field(problem.boundary_data, bgrid.nodes)
        return _Assembly(grid=grid, V=V, w=w, D_lap=D_lap, f=f, Vb=Vb, wb=wb, g=g)
    # eikonal
    e1 = lambda ax: tuple(1 if a == ax else 0 for a in range(d))
    D_ax = tuple(diff_matrix(e1(ax), grid) for ax in range(d))
    m = problem.manifold_points or _default_manifold_points(problem)
    samples = manifold_samples(problem.manifold, m)
    Vs = _interior_vandermonde(problem, grid, samples.points)
    ws = problem.scale * np.asarray(samples.weights)
    return _Assembly(grid=grid, V=V, w=w, D_ax=D_ax, Vs=Vs, ws=ws)


def _default_manifold_points(problem: LossProblem) -> int:
    if problem.manifold.kind == "point":
        return 1
    return max(4 * problem.degree, 8)


def _check_theta(problem: LossProblem, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != problem.n_params:
        raise LossError(
            f"theta length {theta.shape[0]} does not match surrogate "
            f"dimension {problem.n_params}"
        )
    return theta


def reconstruction_loss(theta: np.ndarray, problem: LossProblem) -> LossEval:
    """Squared discrete H^s distance of the surrogate to the target."""
    if problem.kind != RECONSTRUCTION:
        raise LossError(f"expected a reconstruction problem, got {problem.kind}")
    theta = _check_theta(problem, theta)
    a = assemble(problem)
    r = a.V @ theta - a.h
    Wr = a.Ws @ r
    value = float(r @ Wr)
    grad = 2.0 * (a.V.T @ Wr)
    return LossEval(value=value, gradient=grad, parts={"interior": value, "boundary": 0.0})


def poisson_loss(theta: np.ndarray, problem: LossProblem) -> LossEval:
    """Cubature residual of the Laplacian plus the weighted boundary mismatch."""
    if problem.kind != POISSON:
        raise LossError(f"expected a Poisson problem, got {problem.kind}")
    theta = _check_theta(problem, theta)
    a = assemble(problem)
    r = a.D_lap @ (a.V @ theta) - a.f
    interior = float(r @ (a.w * r))
    b = a.Vb @ theta - a.g
    bnd = float(b @ (a.wb * b))
    grad = 2.0 * (a.V.T @ (a.D_lap.T @ (a.w * r))) + 2.0 * (a.Vb.T @ (a.wb * b))
    return LossEval(
        value=interior + bnd,
        gradient=grad,
        parts={"interior": interior, "boundary": bnd},
    )


def _sign0(x: np.ndarray, tol: float) -> np.ndarray:
    """Sign with a dead zone: entries within tol of zero map to 0.

    Implements the minimal-norm subgradient selection sign(0) := 0 robustly
    under roundoff (a derivative that is zero by symmetry evaluates to ~1e-15
    and a hard sign would inject a large spurious subgradient component).
    """
    s = np.sign(x)
    s[np.abs(x) <= tol] = 0.0
    return s


def eikonal_loss(theta: np.ndarray, problem: LossProblem) -> LossEval:
    """l1-gradient-norm residual plus the weighted zero-set mismatch.

    The gradient is the minimal-norm subgradient at kinks (sign(0) = 0).  With
    ``squared=False`` the two parts enter through square roots, matching the
    unsquared-norm formulation; their zero sets agree either way.
    """
    if problem.kind != EIKONAL:
        raise LossError(f"expected an Eikonal problem, got {problem.kind}")
    theta = _check_theta(problem, theta)
    a = assemble(problem)
    u = a.V @ theta
    g_ax = [D @ u for D in a.D_ax]
    absum = np.zeros_like(u)
    for g in g_ax:
        absum += np.abs(g)
    r = absum - 1.0
    interior = float(r @ (a.w * r))
    us = a.Vs @ theta
    bnd = float(us @ (a.ws * us))
    tol = 1e-9 * max(1.0, float(np.max(absum)))
    grad_int = np.zeros_like(theta)
    for D, g in zip(a.D_ax, g_ax):
        grad_int += a.V.T @ (D.T @ (a.w * _sign0(g, tol) * r))
    grad_int *= 2.0
    grad_bnd = 2.0 * (a.Vs.T @ (a.ws * us))
    if problem.squared:
        return LossEval(
            value=interior + bnd,
            gradient=grad_int + grad_bnd,
            parts={"interior": interior, "boundary": bnd},
        )
    si, sb = np.sqrt(interior), np.sqrt(bnd)
    grad = np.zeros_like(theta)
    if si > 0:
        grad += grad_int / (2.0 * si)
    if sb > 0:
        grad += grad_bnd / (2.0 * sb)
    return LossEval(value=si + sb, gradient=grad, parts={"interior": si, "boundary": sb})


_DISPATCH = {
    RECONSTRUCTION: reconstruction_loss,
    POISSON: poisson_loss,
    EIKONAL: eikonal_loss,
}


def evaluate_loss(problem: LossProblem, theta: np.ndarray) -> LossEval:
    """Dispatch to the loss of the problem's kind."""
    return _DISPATCH[problem.kind](theta, problem)


def system_matrix(problem: LossProblem) -> np.ndarray:
    """Symmetric PSD matrix H with loss(theta) = (theta - theta*)^T H (theta - theta*) + const.

    Defined for the linear losses only.
    """
    a = assemble(problem)
    if problem.kind == RECONSTRUCTION:
        return a.V.T @ a.Ws @ a.V
    if problem.kind == POISSON:
        A = a.D_lap @ a.V
        return A.T @ (a.w[:, None] * A) + a.Vb.T @ (a.wb[:, None] * a.Vb)
    raise LossError("the Eikonal loss has no quadratic system matrix")


def system_rhs(problem: LossProblem) -> np.ndarray:
    """Right-hand side b of the normal system H theta = b for linear losses."""
    a = assemble(problem)
    if problem.kind == RECONSTRUCTION:
        return a.V.T @ (a.Ws @ a.h)
    if problem.kind == POISSON:
        A = a.D_lap @ a.V
        return A.T @ (a.w * a.f) + a.Vb.T @ (a.wb * a.g)
    raise LossError("the Eikonal loss has no quadratic system matrix")


def flow_constants(problem: LossProblem) -> FlowConstants:
    """Eigenvalue-derived sigma and L of the quadratic losses.

    sigma = 2 lambda_min(H) and L = 2 lambda_max(H) (spectral norm) for the
    normal-system matrix H; the infinity-norm Lipschitz bound is also
    reported.  Eikonal problems need the empirical estimate in the analysis
    module instead.
    """
    if problem.kind == EIKONAL:
        raise LossError("Eikonal flow constants are estimated empirically")
    H = system_matrix(problem)
    vals = np.linalg.eigvalsh(H)
    if not np.all(np.isfinite(vals)):
        raise LossError("non-finite eigenvalues in the system matrix")
    sigma = 2.0 * float(vals[0])
    lip = 2.0 * float(vals[-1])
    lip_inf = 2.0 * float(np.linalg.norm(H, ord=np.inf))
    contraction = 1.0 - sigma / lip if lip > 0 else 1.0
    return FlowConstants(
        sigma=sigma, lipschitz=lip, contraction=contraction, lipschitz_inf=lip_inf
    )
