"""Estimator front ends: sklearn conventions, solving, classification."""

import numpy as np
import pytest
from sklearn.base import clone

from gradpde.analysis import BLOWUP_CANDIDATE, EXPONENTIAL, POLYNOMIAL_TIME
from gradpde.estimators import (
    ConvergenceRateClassifier,
    NotFittedError,
    SpectralPDESolver,
)
from gradpde.oracles import distance_field, manufactured_poisson, point_manifold


@pytest.fixture
def poisson_solver():
    u, f, g = manufactured_poisson("sin_pi")
    est = SpectralPDESolver(kind="poisson", degree=16, dim=1, data=f, boundary_data=g)
    return est, u


class TestSklearnConventions:
    def test_get_params_round_trip(self, poisson_solver):
        est, _ = poisson_solver
        params = est.get_params()
        assert params["degree"] == 16
        est.set_params(degree=8)
        assert est.get_params()["degree"] == 8

    def test_clone_preserves_params(self, poisson_solver):
        est, _ = poisson_solver
        cl = clone(est)
        assert cl.get_params() == est.get_params()
        assert not hasattr(cl, "coef_")

    def test_predict_before_fit_raises(self, poisson_solver):
        est, _ = poisson_solver
        with pytest.raises(NotFittedError):
            est.predict(np.zeros((3, 1)))


class TestSpectralPDESolver:
    def test_poisson_direct_accuracy(self, poisson_solver):
        est, u = poisson_solver
        est.fit()
        xs = np.linspace(-1, 1, 201).reshape(-1, 1)
        assert np.max(np.abs(est.predict(xs) - u(xs))) < 1e-7
        assert est.constants_ is not None
        assert est.trace_ is None

    def test_reconstruction_flow_solver(self):
        u, _, _ = manufactured_poisson("sin_pi")
        est = SpectralPDESolver(
            kind="reconstruction", degree=6, dim=1, sobolev_order=1,
            data=u, solver="flow", max_iters=5000, grad_tol=1e-12,
        )
        est.fit()
        direct = SpectralPDESolver(
            kind="reconstruction", degree=6, dim=1, sobolev_order=1, data=u
        ).fit()
        assert est.coef_ == pytest.approx(direct.coef_, abs=1e-7)
        assert est.trace_ is not None
        assert est.trace_.losses[-1] <= est.trace_.losses[0]

    def test_eikonal_subgradient_path(self):
        m = point_manifold(0.0)
        est = SpectralPDESolver(
            kind="eikonal", degree=8, dim=1, manifold=m, max_iters=300
        )
        est.fit()
        xs = np.linspace(-1, 1, 101).reshape(-1, 1)
        ref = distance_field(m)(xs)
        assert np.max(np.abs(est.predict(xs) - ref)) < 0.2
        assert est.trace_ is not None

    def test_unknown_solver(self):
        u, f, g = manufactured_poisson("sin_pi")
        est = SpectralPDESolver(kind="poisson", data=f, boundary_data=g, solver="magic")
        with pytest.raises(ValueError):
            est.fit()

    def test_fit_returns_self_and_records_loss(self, poisson_solver):
        est, _ = poisson_solver
        assert est.fit() is est
        assert est.loss_ >= 0.0


class TestConvergenceRateClassifier:
    def test_poisson_polynomial_time(self):
        u, f, g = manufactured_poisson("sin_pi")
        est = ConvergenceRateClassifier(
            kind="poisson", degrees=(4, 8, 12, 16), data=f, boundary_data=g,
            reference=u,
        )
        est.fit()
        assert est.classification_ == POLYNOMIAL_TIME
        assert est.best_fit_.model == EXPONENTIAL
        assert est.report_.rho_est is not None

    def test_eikonal_blowup_candidate(self):
        m = point_manifold(0.0)
        est = ConvergenceRateClassifier(
            kind="eikonal", degrees=(4, 8, 16, 32), manifold=m,
            reference=distance_field(m),
        )
        est.fit()
        assert est.classification_ == BLOWUP_CANDIDATE

    def test_clone_and_params(self):
        est = ConvergenceRateClassifier(degrees=(4, 8, 12))
        cl = clone(est)
        assert cl.get_params()["degrees"] == (4, 8, 12)
