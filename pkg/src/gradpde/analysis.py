"""Empirical verification and complexity classification.

Finite-difference gradient checks, convexity/QGC/RSI probes, the error
decomposition, convergence-rate fitting over three model families, Chebyshev
coefficient analyticity estimation, and the end-to-end blowup classifier.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gradpde.basis import CHEBYSHEV, Surrogate, change_basis, vandermonde
from gradpde.cubature import sobolev_norm_sq, sobolev_weight_matrix
from gradpde.grid import multi_index_set, tensor_grid
from gradpde.loss import (
    EIKONAL,
    LossEval,
    LossProblem,
    evaluate_loss,
    flow_constants,
    FlowConstants,
    assemble,
)
from gradpde import flow as _flow

EXPONENTIAL = "exponential"
ALGEBRAIC = "algebraic"
STRETCHED_EXP = "stretched_exp"

POLYNOMIAL_TIME = "PolynomialTime"
BLOWUP_CANDIDATE = "BlowupCandidate"
INCONCLUSIVE = "Inconclusive"

# winner must beat the runner-up residual by this factor to classify
RUNNER_UP_THRESHOLD = 0.7
# near-ties between models prefer the simpler family; the stretched model
# nests both others (alpha -> 1 and alpha -> 0), so it must win decisively
_TIE_MARGIN = 1.25

_ERR_FLOOR = 1e-16


class AnalysisError(ValueError):
    """Invalid analysis request (too few points, degenerate data)."""


@dataclass(frozen=True)
class RateFit:
    """A fitted convergence model err(n) with its log-space RMS residual."""

    model: str
    params: dict
    residual: float
    data: tuple
    residuals: dict = field(default_factory=dict)
    floored: bool = False

    def predict(self, n: float) -> float:
        p = self.params
        if self.model == EXPONENTIAL:
            return p["C"] * p["rho"] ** (-n)
        if self.model == ALGEBRAIC:
            return p["C"] * n ** (-p["k"])
        return p["C"] * math.exp(-p["c"] * n ** p["alpha"])


@dataclass
class ComplexityReport:
    """Outcome of a degree sweep: classification plus supporting evidence."""

    classification: str
    best_fit: RateFit
    runner_up_residual_ratio: float
    budgets: list
    sweep: list
    rho_est: float | None
    constants: FlowConstants | None
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "best_fit": {
                "model": self.best_fit.model,
                "params": self.best_fit.params,
                "residual": self.best_fit.residual,
            },
            "runner_up_ratio": self.runner_up_residual_ratio,
            "budgets": self.budgets,
            "sweep": [{"n": int(n), "err": float(e)} for n, e in self.sweep],
            "rho_est": self.rho_est if self.rho_est != float("inf") else "inf",
            "constants": None
            if self.constants is None
            else {
                "sigma": self.constants.sigma,
                "L": self.constants.lipschitz,
                "contraction": self.constants.contraction,
            },
            "notes": self.notes,
        }


def _evaluator(problem) -> Callable[[np.ndarray], LossEval]:
    if isinstance(problem, LossProblem):
        return lambda th: evaluate_loss(problem, th)
    if callable(problem):
        return problem
    raise AnalysisError("expected a LossProblem or a loss evaluator callable")


@dataclass(frozen=True)
class GradientCheck:
    max_rel_error: float
    kink: bool = False

    def __float__(self) -> float:
        return self.max_rel_error


def eikonal_kink(problem: LossProblem, theta: np.ndarray, tol: float = 1e-8) -> bool:
    """True if any directional derivative magnitude at a grid node is below tol."""
    if problem.kind != EIKONAL:
        return False
    a = assemble(problem)
    u = a.V @ np.asarray(theta, dtype=float)
    return any(np.min(np.abs(D @ u)) < tol for D in a.D_ax)


def check_gradient(problem, theta: np.ndarray, h: float = 1e-6) -> GradientCheck:
    """Central-difference validation of the analytic gradient.

    Returns the max over coordinates of |analytic - numeric| / (1 + |analytic|).
    For the Eikonal loss a subdifferential point is flagged and the comparison
    skipped (the caller resamples).
    """
    if h <= 0:
        raise AnalysisError("finite-difference step must be positive")
    kink = isinstance(problem, LossProblem) and eikonal_kink(problem, theta)
    if kink:
        return GradientCheck(max_rel_error=float("nan"), kink=True)
    ev_at = _evaluator(problem)
    theta = np.asarray(theta, dtype=float)
    analytic = ev_at(theta).gradient
    worst = 0.0
    for i in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[i] = h
        lp, lm = ev_at(theta + e).value, ev_at(theta - e).value
        if not (np.isfinite(lp) and np.isfinite(lm)):
            raise AnalysisError(f"non-finite loss at probe coordinate {i}")
        numeric = (lp - lm) / (2.0 * h)
        worst = max(worst, abs(analytic[i] - numeric) / (1.0 + abs(analytic[i])))
    return GradientCheck(max_rel_error=worst, kink=False)


def probe_qgc_rsi(
    problem,
    theta_star: np.ndarray,
    samples: int = 100,
    seed: int = 0,
    radius: float = 1.0,
) -> tuple[float, float]:
    """Empirical quadratic-growth and restricted-secant minima around theta*.

    Returns (qgc_min, rsi_min) over random perturbations; both compare against
    sigma/2 from the eigenvalue-derived flow constants for linear losses.
    """
    ev_at = _evaluator(problem)
    theta_star = np.asarray(theta_star, dtype=float)
    loss_star = ev_at(theta_star).value
    rng = np.random.default_rng(seed)
    qgc_min = rsi_min = np.inf
    drawn = 0
    while drawn < samples:
        theta = theta_star + radius * rng.standard_normal(theta_star.shape)
        dist_sq = float(np.sum((theta - theta_star) ** 2))
        if dist_sq < 1e-16:
            continue
        drawn += 1
        ev = ev_at(theta)
        qgc_min = min(qgc_min, (ev.value - loss_star) / dist_sq)
        rsi_min = min(rsi_min, float(ev.gradient @ (theta - theta_star)) / dist_sq)
    return float(qgc_min), float(rsi_min)


def _pad_coeffs(theta: np.ndarray, n: int, fine_n: int, d: int) -> np.ndarray:
    """Embed degree-n Chebyshev coefficients into the degree-fine_n index set."""
    coarse = multi_index_set(n, d)
    fine = multi_index_set(fine_n, d)
    out = np.zeros(len(fine))
    for pos, alpha in enumerate(coarse.indices):
        out[fine.position(alpha)] = theta[pos]
    return out


def error_decomposition(
    problem: LossProblem,
    reference: Surrogate,
    theta_j: np.ndarray,
) -> tuple[float, float, float]:
    """Approximation / integration / optimization split of the total error.

    ``reference`` is a high-degree solution (fine grid oracle).  eps_app is
    the discrete Sobolev distance of the direct minimizer to the reference on
    the fine grid; eps_int compares the loss of the minimizer under degree-n
    and fine cubatures; eps_opt is the loss gap of the supplied iterate.
    """
    fine_n = reference.index_set.n
    if fine_n < 2 * problem.degree:
        raise AnalysisError("reference degree must be at least twice the problem degree")
    theta_star = _flow.direct_solve(problem)
    d = problem.dim
    k = problem.sobolev_order if problem.kind == "reconstruction" else 1
    fine_grid = tensor_grid(fine_n, d)
    op = sobolev_weight_matrix(fine_grid, k)
    V_fine = vandermonde(problem.basis, multi_index_set(problem.degree, d), fine_grid.nodes,
                         grid=tensor_grid(problem.degree, d)).matrix
    u_star = V_fine @ theta_star
    u_ref = reference(fine_grid.nodes)
    eps_app = sobolev_norm_sq(u_star - u_ref, op)

    loss_n = evaluate_loss(problem, theta_star).value
    fine_problem = dataclasses.replace(problem, degree=fine_n)
    if problem.basis != CHEBYSHEV:
        raise AnalysisError("integration error split needs a Chebyshev surrogate")
    loss_fine = evaluate_loss(fine_problem, _pad_coeffs(theta_star, problem.degree, fine_n, d)).value
    eps_int = abs(loss_n - loss_fine)

    eps_opt = abs(loss_n - evaluate_loss(problem, np.asarray(theta_j, dtype=float)).value)
    return float(eps_app), float(eps_int), float(eps_opt)


def _log_fit(x: np.ndarray, logy: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line logy ~ a + b x; returns (a, b, rms residual)."""
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    resid = logy - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def fit_rates(data: Sequence[tuple[float, float]]) -> RateFit:
    """Fit exponential, algebraic, and stretched-exponential decay models.

    Least squares in log space for each family; the lowest-residual model is
    returned, with all residuals reported.  Near-ties prefer the simpler
    family (exponential, then algebraic) since the stretched model nests both.
    """
    if len(data) < 3:
        raise AnalysisError("rate fitting needs at least 3 points")
    n = np.array([float(p[0]) for p in data])
    err = np.array([float(p[1]) for p in data])
    floored = bool(np.any(err < _ERR_FLOOR))
    err = np.maximum(err, _ERR_FLOOR)
    logerr = np.log(err)

    candidates: dict[str, tuple[dict, float]] = {}

    a, b, r = _log_fit(n, logerr)
    rho = math.exp(-b)
    if rho > 1.0:
        candidates[EXPONENTIAL] = ({"C": math.exp(a), "rho": rho}, r)

    a, b, r = _log_fit(np.log(n), logerr)
    k = -b
    if k > 0.0:
        candidates[ALGEBRAIC] = ({"C": math.exp(a), "k": k}, r)

    best_s = None
    for alpha in np.arange(0.05, 1.0001, 0.05):
        a, b, r = _log_fit(n**alpha, logerr)
        c = -b
        if c <= 0.0:
            continue
        if best_s is None or r < best_s[1]:
            best_s = ({"C": math.exp(a), "c": c, "alpha": round(float(alpha), 4)}, r)
    if best_s is not None:
        candidates[STRETCHED_EXP] = best_s

    if not candidates:
        raise AnalysisError("no decaying model fits the data")

    residuals = {m: r for m, (_, r) in candidates.items()}
    winner = min(candidates, key=lambda m: candidates[m][1])
    # tie-breaking toward the less flexible families
    for preferred in (EXPONENTIAL, ALGEBRAIC):
        if (
            winner != preferred
            and preferred in candidates
            and candidates[preferred][1] <= candidates[winner][1] * _TIE_MARGIN
        ):
            winner = preferred
            break
    params, resid = candidates[winner]
    return RateFit(
        model=winner,
        params=params,
        residual=resid,
        data=tuple((float(a_), float(b_)) for a_, b_ in zip(n, err)),
        residuals=residuals,
        floored=floored,
    )


def coefficient_shells(s: Surrogate) -> np.ndarray:
    """Max |coefficient| per l-infinity degree shell of a Chebyshev surrogate."""
    if s.basis != CHEBYSHEV:
        s = change_basis(s, CHEBYSHEV)
    n = s.index_set.n
    shells = np.zeros(n + 1)
    for pos, alpha in enumerate(s.index_set.indices):
        shell = max(alpha)
        shells[shell] = max(shells[shell], abs(float(s.coeffs[pos])))
    return shells


def estimate_analyticity(
    s: Surrogate, residual_threshold: float = 0.75
) -> float | None:
    """Bernstein-ellipse radius from trailing Chebyshev coefficient decay.

    Fits log|theta_k| against k over the trailing half of the degree shells.
    Returns exp(-slope) when geometric decay explains the data better than an
    algebraic law, ``inf`` when the trailing coefficients vanish (an exact
    polynomial), and None when the decay signature is non-analytic.
    """
    if s.index_set.n < 8:
        raise AnalysisError("analyticity estimation needs degree >= 8")
    shells = coefficient_shells(s)
    n = len(shells) - 1
    floor = max(1e-15, 1e-12 * float(np.max(shells)))
    start = n // 2
    ks = np.array([k for k in range(start, n + 1) if shells[k] > floor], dtype=float)
    if len(ks) < 3:
        return float("inf")
    logm = np.log(shells[ks.astype(int)])
    _, slope_k, rms_k = _log_fit(ks, logm)
    _, slope_lk, rms_lk = _log_fit(np.log(ks), logm)
    if slope_k >= 0.0:
        return None
    # geometric decay must beat the algebraic model and dominate the scatter:
    # a near-unit rho whose fit residual is comparable to the per-shell decay
    # is indistinguishable from noise on an algebraic tail
    if rms_k <= rms_lk and rms_k <= residual_threshold and rms_k <= 0.6 * abs(slope_k):
        return float(math.exp(-slope_k))
    return None


def empirical_flow_constants(
    problem: LossProblem,
    theta_ref: np.ndarray,
    samples: int = 50,
    seed: int = 0,
    radius: float = 0.5,
) -> FlowConstants:
    """Sampled coercivity and Lipschitz estimates for non-quadratic losses."""
    ev_at = _evaluator(problem)
    rng = np.random.default_rng(seed)
    theta_ref = np.asarray(theta_ref, dtype=float)
    lip = 0.0
    rsi = np.inf
    g_ref = ev_at(theta_ref).gradient
    for _ in range(samples):
        a = theta_ref + radius * rng.standard_normal(theta_ref.shape)
        b = theta_ref + radius * rng.standard_normal(theta_ref.shape)
        ga, gb = ev_at(a).gradient, ev_at(b).gradient
        dn = float(np.linalg.norm(a - b))
        if dn > 1e-12:
            lip = max(lip, float(np.linalg.norm(ga - gb)) / dn)
        da = a - theta_ref
        dsq = float(da @ da)
        if dsq > 1e-12:
            rsi = min(rsi, float((ga - g_ref) @ da) / dsq)
    sigma = max(float(rsi), 0.0)
    lip = max(lip, sigma, 1e-12)
    contraction = 1.0 - sigma / lip if lip > 0 and sigma > 0 else 1.0
    return FlowConstants(sigma=sigma, lipschitz=lip, contraction=min(contraction, 1.0))


def solve_at_degree(
    problem: LossProblem,
    n: int,
    config: "_flow.FlowConfig | None" = None,
    eikonal_init: str = "oracle",
) -> tuple[np.ndarray, dict]:
    """Solve the problem at degree n: direct for linear losses, flow for Eikonal.

    Returns the coefficients and a metadata dict with keys n, iters, loss.
    """
    config = config or _flow.FlowConfig(max_iters=300, record_every=50)
    pn = dataclasses.replace(problem, degree=n)
    if pn.kind == EIKONAL:
        theta0 = _flow.eikonal_initial_guess(pn, init=eikonal_init)
        theta, trace = _flow.subgradient_flow(pn, theta0, config)
        iters = trace.iterations[-1] if trace.iterations else 0
    else:
        theta = _flow.direct_solve(pn)
        iters = 0
    return theta, {"n": n, "iters": iters, "loss": evaluate_loss(pn, theta).value}


def sweep_errors(
    problem: LossProblem,
    sweep: Sequence[int],
    config: "_flow.FlowConfig | None" = None,
    reference: Callable | None = None,
    error_order: int = 0,
    eikonal_init: str = "oracle",
    solutions: "dict[int, np.ndarray] | None" = None,
) -> tuple[list, dict, list]:
    """Solve the problem at each degree and measure convergence errors.

    Errors are discrete Sobolev distances of order ``error_order`` on a fine
    evaluation grid, against ``reference`` when supplied, else Cauchy
    differences between consecutive-degree solutions.  Pre-computed
    ``solutions`` (degree -> coefficients) skip the solves.  Returns
    (data points, solutions per degree, per-degree metadata).
    """
    sweep = list(sweep)
    if len(sweep) < 3:
        raise AnalysisError("a sweep needs at least 3 degrees")
    if any(b <= a for a, b in zip(sweep, sweep[1:])):
        raise AnalysisError("sweep degrees must be strictly increasing")
    d = problem.dim
    fine_n = 2 * max(sweep)
    fine_grid = tensor_grid(fine_n, d)
    op = sobolev_weight_matrix(fine_grid, error_order)
    ref_vals = None if reference is None else np.asarray(reference(fine_grid.nodes)).reshape(-1)

    if solutions is None:
        solutions = {}
    values: dict[int, np.ndarray] = {}
    meta = []
    for n in sweep:
        if n in solutions:
            theta = solutions[n]
            pn = dataclasses.replace(problem, degree=n)
            info = {"n": n, "iters": 0, "loss": evaluate_loss(pn, theta).value}
        else:
            theta, info = solve_at_degree(problem, n, config, eikonal_init)
            solutions[n] = theta
        V = vandermonde(problem.basis, multi_index_set(n, d), fine_grid.nodes,
                        grid=tensor_grid(n, d)).matrix
        values[n] = V @ theta
        meta.append(info)

    data = []
    if ref_vals is not None:
        for n in sweep:
            data.append((n, math.sqrt(sobolev_norm_sq(values[n] - ref_vals, op))))
    else:
        for a, b in zip(sweep, sweep[1:]):
            data.append((a, math.sqrt(sobolev_norm_sq(values[b] - values[a], op))))
    return data, solutions, meta


def classify_planted(data: Sequence[tuple[float, float]]) -> ComplexityReport:
    """Classify a pre-computed error sequence without running a solver.

    Only the rate fit is available as evidence (no coefficient signature, no
    flow constants), so an exponential winner with margin reports
    PolynomialTime directly.
    """
    best = fit_rates(data)
    resid = best.residuals
    if best.model == EXPONENTIAL and ALGEBRAIC in resid:
        ratio = resid[EXPONENTIAL] / resid[ALGEBRAIC]
    elif EXPONENTIAL in resid:
        ratio = resid[best.model] / resid[EXPONENTIAL]
    else:
        ratio = 0.0
    if ratio >= RUNNER_UP_THRESHOLD:
        classification = INCONCLUSIVE
    elif best.model == EXPONENTIAL:
        classification = POLYNOMIAL_TIME
    else:
        classification = BLOWUP_CANDIDATE
    return ComplexityReport(
        classification=classification,
        best_fit=best,
        runner_up_residual_ratio=float(ratio),
        budgets=[],
        sweep=list(best.data),
        rho_est=None,
        constants=None,
        notes="planted error sequence: rate fit is the only evidence",
    )


def classify(
    problem: LossProblem,
    sweep: Sequence[int],
    config: "_flow.FlowConfig | None" = None,
    reference: Callable | None = None,
    error_order: int = 0,
    eikonal_init: str = "oracle",
    precision_bits: Sequence[int] = (10, 20, 30),
    solutions: "dict[int, np.ndarray] | None" = None,
) -> ComplexityReport:
    """Run the solver over a degree sweep and classify the convergence rate.

    An exponential best fit with an analytic coefficient signature reports
    polynomial-time computability; algebraic or stretched-exponential decay
    with a non-analytic signature reports a blowup candidate; mixed signals
    are inconclusive.  Rate fits are evidence, not certificates.
    """
    data, solutions, meta = sweep_errors(
        problem, sweep, config=config, reference=reference,
        error_order=error_order, eikonal_init=eikonal_init, solutions=solutions,
    )
    best = fit_rates(data)

    top_n = max(solutions)
    top = Surrogate(
        basis=problem.basis,
        index_set=multi_index_set(top_n, problem.dim),
        coeffs=solutions[top_n],
        grid=tensor_grid(top_n, problem.dim) if problem.basis != CHEBYSHEV else None,
    )
    try:
        rho_est = estimate_analyticity(top)
    except AnalysisError:
        rho_est = None

    top_problem = dataclasses.replace(problem, degree=top_n)
    if problem.kind == EIKONAL:
        constants = empirical_flow_constants(top_problem, solutions[top_n])
    else:
        constants = flow_constants(top_problem)
    budgets = [
        _flow.budget(N, best, constants, dim=problem.dim) for N in precision_bits
    ]

    resid = best.residuals
    if best.model == EXPONENTIAL and ALGEBRAIC in resid:
        ratio = resid[EXPONENTIAL] / resid[ALGEBRAIC]
    elif EXPONENTIAL in resid:
        ratio = resid[best.model] / resid[EXPONENTIAL]
    else:
        ratio = 0.0
    analytic = rho_est is not None

    notes = []
    if ratio >= RUNNER_UP_THRESHOLD:
        classification = INCONCLUSIVE
        notes.append("winning model lacks the residual margin over the runner-up")
    elif best.model == EXPONENTIAL:
        if analytic:
            classification = POLYNOMIAL_TIME
        else:
            classification = INCONCLUSIVE
            notes.append("exponential rate but non-analytic coefficient signature")
    else:
        classification = BLOWUP_CANDIDATE
        notes.append("sub-exponential rate is evidence of blowup, not a certificate")
        if analytic:
            notes.append("coefficient signature looks analytic despite the rate")
    if problem.dim == 2:
        notes.append("H^1 blowup evidence in d=2 is borderline for the embedding threshold")

    return ComplexityReport(
        classification=classification,
        best_fit=best,
        runner_up_residual_ratio=float(ratio),
        budgets=budgets,
        sweep=data,
        rho_est=rho_est,
        constants=constants,
        notes="; ".join(notes),
    )
