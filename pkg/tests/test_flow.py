"""Euler flows, the direct solver, and precision budgets."""

import math

import numpy as np
import pytest

from gradpde.analysis import RateFit
from gradpde.flow import (
    FlowConfig,
    FlowError,
    budget,
    contraction_budget_iters,
    direct_solve,
    eikonal_initial_guess,
    euler_flow,
    subgradient_flow,
)
from gradpde.loss import LossProblem, evaluate_loss, flow_constants, system_matrix, system_rhs
from gradpde.oracles import l1_distance, manufactured_poisson, point_manifold


@pytest.fixture
def recon():
    u, _, _ = manufactured_poisson("sin_pi")
    return LossProblem(kind="reconstruction", degree=4, dim=1, sobolev_order=1, data=u)


@pytest.fixture
def poisson():
    _, f, g = manufactured_poisson("sin_pi")
    return LossProblem(kind="poisson", degree=4, dim=1, data=f, boundary_data=g)


@pytest.fixture
def eikonal():
    return LossProblem(kind="eikonal", degree=8, dim=1, manifold=point_manifold(0.0))


class TestFlowConfig:
    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            FlowConfig(step=-0.5)
        with pytest.raises(ValueError):
            FlowConfig(step="fastest")

    def test_rejects_bad_iteration_counts(self):
        with pytest.raises(ValueError):
            FlowConfig(max_iters=0)
        with pytest.raises(ValueError):
            FlowConfig(record_every=0)


class TestEulerFlow:
    def test_converges_to_direct_solution(self, recon):
        theta_star = direct_solve(recon)
        theta, trace = euler_flow(
            recon, np.zeros(5), FlowConfig(max_iters=5000, grad_tol=1e-12)
        )
        assert theta == pytest.approx(theta_star, abs=1e-8)
        assert trace.status in ("grad_tol", "max_iters")

    def test_loss_monotone_with_default_step(self, recon):
        _, trace = euler_flow(recon, np.ones(5), FlowConfig(max_iters=200))
        losses = np.array(trace.losses)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_diverges_with_oversized_step(self, recon):
        L = flow_constants(recon).lipschitz
        _, trace = euler_flow(
            recon, np.ones(5), FlowConfig(step=10.0 / L, max_iters=2000)
        )
        assert trace.status == "diverged"

    def test_grad_tol_stopping(self, recon):
        theta_star = direct_solve(recon)
        _, trace = euler_flow(recon, theta_star, FlowConfig(max_iters=10, grad_tol=1e-6))
        assert trace.status == "grad_tol"
        assert trace.iterations == [0]

    def test_error_fn_recorded(self, recon):
        theta_star = direct_solve(recon)
        err = lambda th: float(np.linalg.norm(th - theta_star))
        _, trace = euler_flow(
            recon, np.zeros(5), FlowConfig(max_iters=50, record_every=10), error_fn=err
        )
        assert len(trace.errors) == len(trace.iterations)
        assert trace.errors[0] >= trace.errors[-1]


class TestSubgradientFlow:
    def test_only_for_eikonal(self, recon):
        with pytest.raises(FlowError):
            subgradient_flow(recon, np.zeros(5), FlowConfig())

    def test_best_so_far_never_worse_than_start(self, eikonal):
        theta0 = eikonal_initial_guess(eikonal, init="oracle")
        start = evaluate_loss(eikonal, theta0).value
        theta, trace = subgradient_flow(eikonal, theta0, FlowConfig(max_iters=200))
        assert evaluate_loss(eikonal, theta).value <= start + 1e-14
        assert min(trace.losses) == pytest.approx(evaluate_loss(eikonal, theta).value)

    def test_zero_init_is_stationary(self, eikonal):
        # theta = 0 has a zero minimal-norm subgradient: the flow cannot move
        theta, trace = subgradient_flow(
            eikonal, np.zeros(eikonal.n_params), FlowConfig(max_iters=20)
        )
        assert theta == pytest.approx(np.zeros(eikonal.n_params))
        assert trace.status == "grad_tol"

    def test_fixed_step_policy(self, eikonal):
        theta0 = eikonal_initial_guess(eikonal, init="oracle")
        _, trace = subgradient_flow(
            eikonal, theta0, FlowConfig(step=1e-4, step_policy="fixed", max_iters=50)
        )
        assert trace.status in ("max_iters", "grad_tol")

    def test_oracle_init_approximates_distance(self, eikonal):
        theta0 = eikonal_initial_guess(eikonal, init="oracle")
        from gradpde.basis import Surrogate, CHEBYSHEV
        from gradpde.grid import multi_index_set

        s = Surrogate(basis=CHEBYSHEV, index_set=multi_index_set(8, 1), coeffs=theta0)
        xs = np.linspace(-1, 1, 101).reshape(-1, 1)
        ref = np.array([l1_distance(eikonal.manifold, x) for x in xs])
        assert np.max(np.abs(s(xs) - ref)) < 0.2

    def test_unknown_init(self, eikonal):
        with pytest.raises(FlowError):
            eikonal_initial_guess(eikonal, init="warm")


class TestDirectSolve:
    def test_matches_normal_equations(self, recon):
        # oracle: explicit solve of the (well-conditioned at n=4) normal system
        ref = np.linalg.solve(system_matrix(recon), system_rhs(recon))
        assert direct_solve(recon) == pytest.approx(ref, abs=1e-9)

    def test_residual_gradient_is_small(self, poisson):
        theta = direct_solve(poisson)
        g = evaluate_loss(poisson, theta).gradient
        assert np.linalg.norm(g) < 1e-8 * (1 + np.linalg.norm(system_rhs(poisson)))

    def test_rejects_eikonal(self, eikonal):
        with pytest.raises(FlowError):
            direct_solve(eikonal)


class TestBudgets:
    def test_contraction_iteration_count(self):
        # closed form: smallest j with contraction^j <= 2^-N
        N, q = 20, 0.9
        j = contraction_budget_iters(N, q)
        assert q**j <= 2.0**-N < q ** (j - 1)

    def test_budget_degree_from_rate(self):
        rate = RateFit(
            model="exponential", params={"C": 3.0, "rho": 2.0},
            residual=0.0, data=((4, 3 * 2**-4),),
        )
        from gradpde.loss import FlowConstants

        consts = FlowConstants(sigma=1.0, lipschitz=2.0, contraction=0.5)
        b = budget(10, rate, consts)
        # smallest n with 3 * 2^-n <= 2^-10
        assert b["n"] == 12
        assert b["j"] == contraction_budget_iters(10, 0.5)
        assert b["ops"] == b["j"] * (b["n"] + 1) ** 2
        assert not b["subgradient_fallback"]

    def test_subgradient_fallback_flagged(self):
        rate = RateFit(
            model="algebraic", params={"C": 1.0, "k": 2.0},
            residual=0.0, data=((4, 1 / 16),),
        )
        from gradpde.loss import FlowConstants

        consts = FlowConstants(sigma=0.0, lipschitz=1.0, contraction=1.0)
        b = budget(4, rate, consts)
        assert b["subgradient_fallback"]
        assert b["j"] == 2 ** 8

    def test_invalid_precision(self):
        rate = RateFit(model="exponential", params={"C": 1.0, "rho": 2.0},
                       residual=0.0, data=())
        from gradpde.loss import FlowConstants

        with pytest.raises(ValueError):
            budget(0, rate, FlowConstants(sigma=1.0, lipschitz=2.0, contraction=0.5))
