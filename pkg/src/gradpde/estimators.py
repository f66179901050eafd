"""Estimator-style front ends: a solver and a rate classifier.

Thin wrappers with the scikit-learn ``fit``/``predict``/``get_params``
conventions over the loss, flow, and analysis layers.  Problem data
(callables, manifold descriptors) are constructor parameters; ``fit`` takes no
training arrays because the grids are fixed by the degree.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from gradpde import analysis, flow as _flow
from gradpde.basis import CHEBYSHEV, Surrogate
from gradpde.grid import multi_index_set, tensor_grid
from gradpde.loss import (
    EIKONAL,
    POISSON,
    RECONSTRUCTION,
    LossProblem,
    evaluate_loss,
    flow_constants,
)
from gradpde.oracles import ManifoldDescriptor


class NotFittedError(RuntimeError):
    """predict/report access before fit."""


class SpectralPDESolver(BaseEstimator):
    """Solve one variational problem on a fixed-degree surrogate space.

    Parameters
    ----------
    kind : {'reconstruction', 'poisson', 'eikonal'}
    degree : int
        Polynomial degree n of the surrogate space.
    dim : int
        Spatial dimension of the hypercube domain.
    data : callable, optional
        Interior field: reconstruction target or Poisson source, mapping
        point arrays of shape (N, d) to values of shape (N,).
    boundary_data : callable, optional
        Dirichlet trace for the Poisson loss.
    manifold : ManifoldDescriptor, optional
        Zero set for the Eikonal loss.
    solver : {'auto', 'direct', 'flow'}
        'auto' direct-solves linear losses and runs the subgradient flow for
        the Eikonal loss.
    eikonal_init : {'oracle', 'zero'}
        Flow start: distance-field projection or the zero polynomial.

    Attributes
    ----------
    coef_ : ndarray
        Fitted surrogate coefficients.
    surrogate_ : Surrogate
        The fitted polynomial, callable at points.
    trace_ : FlowTrace or None
        Iteration trace when an iterative solver ran.
    constants_ : FlowConstants or None
        Eigenvalue-derived flow constants (linear losses).
    """

    def __init__(
        self,
        kind: str = POISSON,
        degree: int = 8,
        dim: int = 1,
        sobolev_order: int = 0,
        data: Callable | None = None,
        boundary_data: Callable | None = None,
        manifold: ManifoldDescriptor | None = None,
        boundary_scale: float | None = None,
        solver: str = "auto",
        eikonal_init: str = "oracle",
        step: float | str = _flow.ONE_OVER_L,
        max_iters: int = 1000,
        grad_tol: float = 1e-10,
        seed: int = 0,
    ):
        self.kind = kind
        self.degree = degree
        self.dim = dim
        self.sobolev_order = sobolev_order
        self.data = data
        self.boundary_data = boundary_data
        self.manifold = manifold
        self.boundary_scale = boundary_scale
        self.solver = solver
        self.eikonal_init = eikonal_init
        self.step = step
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.seed = seed

    def _problem(self) -> LossProblem:
        return LossProblem(
            kind=self.kind,
            degree=self.degree,
            dim=self.dim,
            sobolev_order=self.sobolev_order,
            data=self.data,
            boundary_data=self.boundary_data,
            manifold=self.manifold,
            boundary_scale=self.boundary_scale,
        )

    def fit(self, X=None, y=None):
        """Solve the configured problem; X and y are ignored."""
        problem = self._problem()
        config = _flow.FlowConfig(
            step=self.step,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            seed=self.seed,
            record_every=max(1, self.max_iters // 100),
        )
        self.trace_ = None
        self.constants_ = None
        if problem.kind == EIKONAL:
            theta0 = _flow.eikonal_initial_guess(problem, init=self.eikonal_init)
            coef, self.trace_ = _flow.subgradient_flow(problem, theta0, config)
        elif self.solver in ("auto", "direct"):
            coef = _flow.direct_solve(problem)
            self.constants_ = flow_constants(problem)
        elif self.solver == "flow":
            self.constants_ = flow_constants(problem)
            coef, self.trace_ = _flow.euler_flow(
                problem, np.zeros(problem.n_params), config
            )
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        self.coef_ = coef
        self.loss_ = evaluate_loss(problem, coef).value
        self.surrogate_ = Surrogate(
            basis=CHEBYSHEV,
            index_set=multi_index_set(self.degree, self.dim),
            coeffs=coef,
        )
        return self

    def predict(self, X) -> np.ndarray:
        """Evaluate the fitted surrogate at points X of shape (N, d)."""
        if not hasattr(self, "coef_"):
            raise NotFittedError("call fit before predict")
        return self.surrogate_(np.asarray(X, dtype=float))


class ConvergenceRateClassifier(BaseEstimator):
    """Sweep degrees, fit convergence models, and classify the rate.

    Parameters
    ----------
    degrees : sequence of int
        Strictly increasing sweep; at least 3 entries.
    reference : callable, optional
        Ground-truth field for error measurement; without it consecutive
        degree differences serve as the error proxy.
    error_order : int
        Sobolev order of the discrete error metric.

    Attributes
    ----------
    report_ : ComplexityReport
    classification_ : str
    best_fit_ : RateFit
    """

    def __init__(
        self,
        kind: str = POISSON,
        degrees: Sequence[int] = (4, 8, 12, 16),
        dim: int = 1,
        sobolev_order: int = 0,
        data: Callable | None = None,
        boundary_data: Callable | None = None,
        manifold: ManifoldDescriptor | None = None,
        boundary_scale: float | None = None,
        reference: Callable | None = None,
        error_order: int = 0,
        eikonal_init: str = "oracle",
        max_iters: int = 300,
        seed: int = 0,
    ):
        self.kind = kind
        self.degrees = degrees
        self.dim = dim
        self.sobolev_order = sobolev_order
        self.data = data
        self.boundary_data = boundary_data
        self.manifold = manifold
        self.boundary_scale = boundary_scale
        self.reference = reference
        self.error_order = error_order
        self.eikonal_init = eikonal_init
        self.max_iters = max_iters
        self.seed = seed

    def fit(self, X=None, y=None):
        """Run the sweep and classification; X and y are ignored."""
        problem = LossProblem(
            kind=self.kind,
            degree=min(self.degrees),
            dim=self.dim,
            sobolev_order=self.sobolev_order,
            data=self.data,
            boundary_data=self.boundary_data,
            manifold=self.manifold,
            boundary_scale=self.boundary_scale,
        )
        config = _flow.FlowConfig(
            max_iters=self.max_iters, record_every=50, seed=self.seed
        )
        self.report_ = analysis.classify(
            problem,
            list(self.degrees),
            config=config,
            reference=self.reference,
            error_order=self.error_order,
            eikonal_init=self.eikonal_init,
        )
        self.classification_ = self.report_.classification
        self.best_fit_ = self.report_.best_fit
        return self
