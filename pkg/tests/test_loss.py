"""Loss values, gradients, quadratic structure, and flow constants."""

import numpy as np
import pytest

from gradpde.basis import LAGRANGE
from gradpde.grid import tensor_grid
from gradpde.loss import (
    LossError,
    LossProblem,
    evaluate_loss,
    eikonal_loss,
    flow_constants,
    poisson_loss,
    reconstruction_loss,
    system_matrix,
    system_rhs,
)
from gradpde.oracles import l1_sphere, manufactured_poisson, point_manifold


def fd_gradient(problem, theta, h=1e-6):
    """Independent central-difference gradient oracle."""
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        lp = evaluate_loss(problem, theta + e).value
        lm = evaluate_loss(problem, theta - e).value
        grad[i] = (lp - lm) / (2.0 * h)
    return grad


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
    return LossProblem(kind="eikonal", degree=4, dim=1, manifold=point_manifold(0.0))


class TestValidation:
    def test_unknown_kind(self):
        with pytest.raises(LossError):
            LossProblem(kind="heat", degree=4, dim=1)

    def test_eikonal_needs_manifold(self):
        with pytest.raises(LossError):
            LossProblem(kind="eikonal", degree=4, dim=1)

    def test_manifold_dimension_mismatch(self):
        with pytest.raises(LossError):
            LossProblem(kind="eikonal", degree=4, dim=2, manifold=point_manifold(0.0))

    def test_theta_length_checked(self, recon):
        with pytest.raises(LossError):
            evaluate_loss(recon, np.zeros(3))

    def test_kind_dispatch_guards(self, recon, poisson):
        with pytest.raises(LossError):
            poisson_loss(np.zeros(5), recon)
        with pytest.raises(LossError):
            reconstruction_loss(np.zeros(5), poisson)

    def test_boundary_scale_defaults_to_degree(self, poisson):
        assert poisson.scale == 4.0
        scaled = LossProblem(
            kind="poisson", degree=4, dim=1, boundary_scale=7.5,
            data=poisson.data, boundary_data=poisson.boundary_data,
        )
        assert scaled.scale == 7.5


class TestReconstruction:
    def test_zero_loss_at_interpolant_in_lagrange_basis(self):
        # Lagrange coefficients are node values, so the grid samples of the
        # target are the exact minimizer with zero residual
        h = lambda pts: np.cos(pts[:, 0])
        p = LossProblem(kind="reconstruction", degree=6, dim=1, data=h, basis=LAGRANGE)
        grid = tensor_grid(6, 1)
        ev = evaluate_loss(p, h(grid.nodes))
        assert ev.value == pytest.approx(0.0, abs=1e-20)
        assert ev.gradient == pytest.approx(np.zeros(7), abs=1e-10)

    def test_gradient_matches_finite_differences(self, recon):
        rng = np.random.default_rng(0)
        theta = rng.standard_normal(5)
        ev = evaluate_loss(recon, theta)
        assert ev.gradient == pytest.approx(fd_gradient(recon, theta), rel=1e-6, abs=1e-8)

    def test_quadratic_structure(self, recon):
        # L(theta) = theta^T H theta - 2 b^T theta + c with H, b from the
        # normal system; verify against three evaluations
        H = system_matrix(recon)
        b = system_rhs(recon)
        c = evaluate_loss(recon, np.zeros(5)).value
        rng = np.random.default_rng(1)
        for _ in range(3):
            th = rng.standard_normal(5)
            expected = th @ H @ th - 2.0 * b @ th + c
            assert evaluate_loss(recon, th).value == pytest.approx(expected, rel=1e-10)


class TestPoisson:
    def test_small_loss_at_projected_solution(self, poisson):
        from gradpde.basis import cheb_project

        u, _, _ = manufactured_poisson("sin_pi")
        fine = LossProblem(kind="poisson", degree=16, dim=1,
                           data=poisson.data, boundary_data=poisson.boundary_data)
        s = cheb_project(u, 16, 40)
        assert evaluate_loss(fine, s.coeffs).value < 1e-10

    def test_gradient_matches_finite_differences(self, poisson):
        rng = np.random.default_rng(2)
        theta = rng.standard_normal(5)
        ev = evaluate_loss(poisson, theta)
        assert ev.gradient == pytest.approx(fd_gradient(poisson, theta), rel=1e-5, abs=1e-7)

    def test_parts_sum_to_value(self, poisson):
        ev = evaluate_loss(poisson, np.ones(5))
        assert ev.parts["interior"] + ev.parts["boundary"] == pytest.approx(ev.value)


class TestEikonal:
    def test_gradient_zero_at_origin(self, eikonal):
        # theta = 0: all derivative signs are 0 (minimal-norm subgradient)
        # and the manifold term vanishes
        ev = evaluate_loss(eikonal, np.zeros(5))
        assert ev.gradient == pytest.approx(np.zeros(5), abs=1e-14)

    def test_gradient_matches_finite_differences_off_kinks(self, eikonal):
        from gradpde.loss import assemble

        rng = np.random.default_rng(3)
        a = assemble(eikonal)
        checked = 0
        while checked < 10:
            theta = rng.standard_normal(5)
            du = a.D_ax[0] @ (a.V @ theta)
            if np.min(np.abs(du)) < 1e-6:
                continue
            checked += 1
            ev = evaluate_loss(eikonal, theta)
            assert ev.gradient == pytest.approx(
                fd_gradient(eikonal, theta), rel=1e-5, abs=1e-7
            )

    def test_unsquared_variant_takes_roots(self, eikonal):
        import dataclasses

        unsq = dataclasses.replace(eikonal, squared=False)
        theta = np.array([0.1, 0.2, -0.3, 0.4, 0.05])
        sq = evaluate_loss(eikonal, theta)
        us = evaluate_loss(unsq, theta)
        assert us.parts["interior"] == pytest.approx(np.sqrt(sq.parts["interior"]))
        assert us.parts["boundary"] == pytest.approx(np.sqrt(sq.parts["boundary"]))
        assert us.value == pytest.approx(us.parts["interior"] + us.parts["boundary"])

    def test_d2_sphere_loss_evaluates(self):
        p = LossProblem(kind="eikonal", degree=4, dim=2, manifold=l1_sphere((0.0, 0.0), 0.5))
        ev = evaluate_loss(p, np.zeros(25))
        assert np.isfinite(ev.value)

    def test_no_system_matrix(self, eikonal):
        with pytest.raises(LossError):
            system_matrix(eikonal)
        with pytest.raises(LossError):
            eikonal_loss(np.zeros(5), LossProblem(
                kind="reconstruction", degree=4, dim=1, data=lambda p: p[:, 0]))


class TestFlowConstants:
    def test_eigenvalue_constants_vs_fd_hessian(self, recon):
        # oracle: finite-difference Hessian of the quadratic loss
        n = 5
        H_fd = np.empty((n, n))
        h = 1e-5
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            gp = evaluate_loss(recon, e).gradient
            gm = evaluate_loss(recon, -e).gradient
            H_fd[:, i] = (gp - gm) / (2 * h)
        vals = np.linalg.eigvalsh(0.5 * (H_fd + H_fd.T))
        c = flow_constants(recon)
        assert c.sigma == pytest.approx(vals[0], rel=1e-5)
        assert c.lipschitz == pytest.approx(vals[-1], rel=1e-5)

    def test_contraction_in_unit_interval(self, poisson):
        c = flow_constants(poisson)
        assert 0.0 < c.sigma <= c.lipschitz
        assert 0.0 <= c.contraction < 1.0
        assert c.lipschitz_inf >= c.lipschitz - 1e-9

    def test_eikonal_rejected(self, eikonal):
        with pytest.raises(LossError):
            flow_constants(eikonal)
