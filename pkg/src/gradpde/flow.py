"""Discrete gradient-flow engine with a direct-solve oracle for linear losses.

Explicit Euler iteration on the coefficient vector, a subgradient variant for
the non-smooth Eikonal loss, step policies derived from Lipschitz constants,
and iteration/degree budgets from a fitted convergence model.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from gradpde.basis import CHEBYSHEV, cheb_project
from gradpde.loss import (
    EIKONAL,
    POISSON,
    RECONSTRUCTION,
    LossProblem,
    assemble,
    evaluate_loss,
    flow_constants,
    system_matrix,
    system_rhs,
)
from gradpde.oracles import distance_field


class FlowError(RuntimeError):
    """Solver failure (divergence, singular system)."""


ONE_OVER_L = "one_over_L"


@dataclass(frozen=True)
class FlowConfig:
    """Step policy, stopping rules, and trace recording cadence.

    ``step`` is either a positive real or the ``one_over_L`` policy; the
    subgradient flow treats a real step as the constant c of the diminishing
    schedule c / sqrt(j + 1) unless ``step_policy`` is ``fixed``.
    """

    step: float | str = ONE_OVER_L
    step_policy: str = "diminishing"
    max_iters: int = 1000
    grad_tol: float = 1e-10
    loss_tol: float = 0.0
    record_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.step, str) and self.step != ONE_OVER_L:
            raise ValueError(f"unknown step policy {self.step!r}")
        if not isinstance(self.step, str) and self.step <= 0:
            raise ValueError("step must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")


@dataclass
class FlowTrace:
    """Recorded iterates of one flow run."""

    iterations: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    status: str = "max_iters"
    wall_time: float = 0.0


def _resolve_step(problem: LossProblem, config: FlowConfig) -> float:
    if isinstance(config.step, str):
        return 1.0 / flow_constants(problem).lipschitz
    return float(config.step)


def euler_flow(
    problem: LossProblem,
    theta0: np.ndarray,
    config: FlowConfig,
    error_fn: Callable[[np.ndarray], float] | None = None,
) -> tuple[np.ndarray, FlowTrace]:
    """Explicit Euler iteration theta <- theta - step * grad.

    With the 1/L step policy the loss is non-increasing for the linear
    losses.  Non-finite loss or gradient aborts with the last good iterate.
    """
    t0 = time.perf_counter()
    step = _resolve_step(problem, config)
    theta = np.asarray(theta0, dtype=float).copy()
    trace = FlowTrace()

    def record(j, ev):
        trace.iterations.append(j)
        trace.losses.append(ev.value)
        trace.grad_norms.append(float(np.linalg.norm(ev.gradient)))
        if error_fn is not None:
            trace.errors.append(float(error_fn(theta)))

    for j in range(config.max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            ev = evaluate_loss(problem, theta)
        if not (np.isfinite(ev.value) and np.all(np.isfinite(ev.gradient))):
            trace.status = "diverged"
            break
        if j % config.record_every == 0 or j == config.max_iters:
            record(j, ev)
        gnorm = float(np.linalg.norm(ev.gradient))
        if gnorm <= config.grad_tol:
            trace.status = "grad_tol"
            break
        if config.loss_tol > 0 and ev.value <= config.loss_tol:
            trace.status = "loss_tol"
            break
        if j == config.max_iters:
            trace.status = "max_iters"
            break
        theta = theta - step * ev.gradient
    trace.wall_time = time.perf_counter() - t0
    return theta, trace


def _local_lipschitz(
    problem: LossProblem,
    theta0: np.ndarray,
    samples: int = 16,
    radius: float = 0.1,
    seed: int = 0,
) -> float:
    """Sampled gradient Lipschitz estimate in a ball around theta0."""
    rng = np.random.default_rng(seed)
    lip = 1.0
    for _ in range(samples):
        a = theta0 + radius * rng.standard_normal(theta0.shape)
        b = theta0 + radius * rng.standard_normal(theta0.shape)
        dn = float(np.linalg.norm(a - b))
        if dn < 1e-12:
            continue
        ga = evaluate_loss(problem, a).gradient
        gb = evaluate_loss(problem, b).gradient
        lip = max(lip, float(np.linalg.norm(ga - gb)) / dn)
    return lip


def subgradient_flow(
    problem: LossProblem,
    theta0: np.ndarray,
    config: FlowConfig,
    error_fn: Callable[[np.ndarray], float] | None = None,
) -> tuple[np.ndarray, FlowTrace]:
    """Euler subgradient iteration returning the best-so-far iterate by loss.

    Step schedule: c / sqrt(j + 1) with c from ``config.step``, or a fixed
    step when ``step_policy`` is ``fixed``.  The ``one_over_L`` policy sets c
    from a sampled local Lipschitz estimate around theta0 (the loss is not
    globally Lipschitz-smooth, so the eigenvalue route is unavailable).
    """
    if problem.kind != EIKONAL:
        raise FlowError("the subgradient flow targets the Eikonal loss")
    t0 = time.perf_counter()
    theta0 = np.asarray(theta0, dtype=float)
    if isinstance(config.step, str):
        c = 1.0 / _local_lipschitz(problem, theta0, seed=config.seed)
    else:
        c = float(config.step)
    theta = np.asarray(theta0, dtype=float).copy()
    best_theta, best_loss = theta.copy(), np.inf
    trace = FlowTrace()
    for j in range(config.max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            ev = evaluate_loss(problem, theta)
        if (
            not (np.isfinite(ev.value) and np.all(np.isfinite(ev.gradient)))
            or ev.value > 1e6 * (1.0 + min(best_loss, 1e12))
        ):
            trace.status = "diverged"
            break
        if ev.value < best_loss:
            best_loss, best_theta = ev.value, theta.copy()
        if j % config.record_every == 0 or j == config.max_iters:
            trace.iterations.append(j)
            trace.losses.append(best_loss)
            trace.grad_norms.append(float(np.linalg.norm(ev.gradient)))
            if error_fn is not None:
                trace.errors.append(float(error_fn(best_theta)))
        if float(np.linalg.norm(ev.gradient)) <= config.grad_tol:
            trace.status = "grad_tol"
            break
        if ev.value <= config.loss_tol:
            trace.status = "loss_tol"
            break
        if j == config.max_iters:
            trace.status = "max_iters"
            break
        step = c if config.step_policy == "fixed" else c / math.sqrt(j + 1.0)
        theta = theta - step * ev.gradient
    trace.wall_time = time.perf_counter() - t0
    return best_theta, trace


def eikonal_initial_guess(problem: LossProblem, init: str = "zero") -> np.ndarray:
    """Initial coefficients for the Eikonal flow.

    ``zero`` starts from the zero polynomial; ``oracle`` projects the exact
    l1 distance field of the manifold onto the surrogate space.
    """
    if init == "zero":
        return np.zeros(problem.n_params)
    if init == "oracle":
        n, d = problem.degree, problem.dim
        s = cheb_project(distance_field(problem.manifold), n, 2 * n + 8, d=d)
        return np.asarray(s.coeffs)
    raise FlowError(f"unknown Eikonal initialization {init!r}")


def direct_solve(problem: LossProblem) -> np.ndarray:
    """Exact minimizer of a linear loss by direct factorization.

    Solves the least-squares system in square-root form (QR) for conditioning;
    the minimizer coincides with that of the symmetric positive-definite
    normal system.
    """
    if problem.kind not in (RECONSTRUCTION, POISSON):
        raise FlowError("direct solve applies to the linear losses only")
    a = assemble(problem)
    if problem.kind == RECONSTRUCTION:
        try:
            C = scipy.linalg.cholesky(a.Ws, lower=False)
        except scipy.linalg.LinAlgError as exc:
            raise FlowError("Sobolev weight matrix is not positive definite") from exc
        M = C @ a.V
        rhs = C @ a.h
    else:
        sw = np.sqrt(a.w)
        swb = np.sqrt(a.wb)
        M = np.vstack([sw[:, None] * (a.D_lap @ a.V), swb[:, None] * a.Vb])
        rhs = np.concatenate([sw * a.f, swb * a.g])
    theta, _, rank, _ = scipy.linalg.lstsq(M, rhs, lapack_driver="gelsd")
    if rank < M.shape[1]:
        raise FlowError(f"normal system is numerically singular (rank {rank})")
    b = system_rhs(problem)
    gnorm = float(np.linalg.norm(evaluate_loss(problem, theta).gradient))
    if gnorm > 1e-8 * (1.0 + float(np.linalg.norm(b))):
        raise FlowError(f"direct solve residual gradient {gnorm:.3e} too large")
    return theta


def contraction_budget_iters(N: int, contraction: float) -> int:
    """Iterations for a 2^-N loss gap under geometric decay."""
    return math.ceil(N * math.log(2.0) / abs(math.log(contraction)))


def budget(N: int, rate, constants, dim: int = 1) -> dict:
    """Degree, iteration, and operation budgets for precision 2^-N.

    ``rate`` is a fitted convergence model (analysis module); ``constants``
    carries sigma and L.  Without linear convergence (contraction >= 1) the
    iteration budget falls back to the subgradient O(1/eps^2) count, flagged.
    """
    if N < 1:
        raise ValueError("precision bits must be positive")
    target = 2.0 ** (-N)
    n_required = None
    for n in range(1, 10**6 + 1):
        if rate.predict(n) <= target:
            n_required = n
            break
    if n_required is None:
        raise FlowError(f"no degree below 10^6 reaches precision 2^-{N}")
    flagged = False
    if 0.0 < constants.contraction < 1.0:
        j_required = contraction_budget_iters(N, constants.contraction)
    else:
        j_required = math.ceil(2.0 ** (2 * N))
        flagged = True
    ops = j_required * (n_required + 1) ** (2 * dim)
    return {
        "N": N,
        "n": n_required,
        "j": j_required,
        "ops": ops,
        "subgradient_fallback": flagged,
    }
