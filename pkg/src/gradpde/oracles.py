"""Closed-form references used by tests, classification, and error decomposition.

Covers exact l1 signed-distance functions with medial-axis predicates,
manufactured Poisson solutions with analytically derived sources, and
high-degree reference solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OracleError(ValueError):
    """Unknown oracle or descriptor request."""


@dataclass(frozen=True)
class ManifoldDescriptor:
    """Co-dimension-one sample manifold inside the closed hypercube.

    Kinds: ``point`` (location), ``l1_sphere`` (center, radius, the l1 diamond),
    ``axis_hyperplane`` (axis, offset).
    """

    kind: str
    dim: int
    location: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0
    axis: int = 0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point", "l1_sphere", "axis_hyperplane"):
            raise OracleError(f"unsupported manifold kind {self.kind!r}")
        if self.kind == "point" and len(self.location) != self.dim:
            raise OracleError("point location must match the dimension")
        if self.kind == "l1_sphere":
            if len(self.center) != self.dim:
                raise OracleError("sphere center must match the dimension")
            if self.radius <= 0:
                raise OracleError("sphere radius must be positive")


def point_manifold(*location: float) -> ManifoldDescriptor:
    return ManifoldDescriptor(kind="point", dim=len(location), location=tuple(location))


def l1_sphere(center: tuple[float, ...], radius: float) -> ManifoldDescriptor:
    return ManifoldDescriptor(
        kind="l1_sphere", dim=len(center), center=tuple(center), radius=radius
    )


def axis_hyperplane(dim: int, axis: int, offset: float) -> ManifoldDescriptor:
    return ManifoldDescriptor(kind="axis_hyperplane", dim=dim, axis=axis, offset=offset)


def l1_distance(descriptor: ManifoldDescriptor, x: np.ndarray) -> float:
    """Exact l1 distance from x to the manifold."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if descriptor.kind == "point":
        return float(np.sum(np.abs(x - np.asarray(descriptor.location))))
    if descriptor.kind == "l1_sphere":
        return float(abs(np.sum(np.abs(x - np.asarray(descriptor.center))) - descriptor.radius))
    return float(abs(x[descriptor.axis] - descriptor.offset))


def distance_field(descriptor: ManifoldDescriptor):
    """Vectorized l1 distance callable over point arrays of shape (N, d)."""

    def phi(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, descriptor.dim)
        return np.array([l1_distance(descriptor, p) for p in pts])

    return phi


def on_medial_axis(descriptor: ManifoldDescriptor, x: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether two distinct nearest l1 points exist within ``tol``.

    Closed form per descriptor: the l1 sphere is medial on the axis-aligned
    lines through its center (the center itself included) away from the
    manifold; points and hyperplanes have unique nearest points everywhere.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if descriptor.kind != "l1_sphere":
        return False
    if l1_distance(descriptor, x) <= tol:
        return False
    c = np.asarray(descriptor.center)
    return bool(np.any(np.abs(x - c) <= tol))


_POISSON_CATALOG = ("sin_pi", "sin_sin", "runge_source")


def manufactured_poisson(name: str):
    """Catalog of (u*, f = laplacian u*, g = trace of u*) callable triples.

    All callables accept point arrays of shape (N, d) and return values of
    shape (N,).
    """
    if name == "sin_pi":

        def u(p):
            p = np.asarray(p, dtype=float).reshape(-1, 1)
            return np.sin(np.pi * p[:, 0])

        def f(p):
            p = np.asarray(p, dtype=float).reshape(-1, 1)
            return -np.pi**2 * np.sin(np.pi * p[:, 0])

        return u, f, u
    if name == "sin_sin":

        def u(p):
            p = np.asarray(p, dtype=float).reshape(-1, 2)
            return np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])

        def f(p):
            p = np.asarray(p, dtype=float).reshape(-1, 2)
            return -2.0 * np.pi**2 * np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])

        return u, f, u
    if name == "runge_source":

        def u(p):
            p = np.asarray(p, dtype=float).reshape(-1, 1)
            return 1.0 / (1.0 + 25.0 * p[:, 0] ** 2)

        def f(p):
            p = np.asarray(p, dtype=float).reshape(-1, 1)
            x = p[:, 0]
            return (3750.0 * x**2 - 50.0) / (1.0 + 25.0 * x**2) ** 3

        return u, f, u
    raise OracleError(f"unknown manufactured solution {name!r}; catalog: {_POISSON_CATALOG}")


def poisson_dim(name: str) -> int:
    if name not in _POISSON_CATALOG:
        raise OracleError(f"unknown manufactured solution {name!r}")
    return 2 if name == "sin_sin" else 1


def fine_reference(problem, fine_degree: int):
    """High-degree reference solution for the error decomposition.

    Linear losses are solved directly; the Eikonal problem runs a long
    subgradient flow started from the distance-field interpolant.
    """
    import dataclasses

    from gradpde import flow as _flow
    from gradpde.basis import CHEBYSHEV, Surrogate
    from gradpde.grid import multi_index_set
    from gradpde.loss import EIKONAL

    if fine_degree < 2 * problem.degree:
        raise OracleError(
            f"fine degree {fine_degree} must be at least twice the problem "
            f"degree {problem.degree}"
        )
    fine = dataclasses.replace(problem, degree=fine_degree)
    if fine.kind == EIKONAL:
        theta0 = _flow.eikonal_initial_guess(fine, init="oracle")
        config = _flow.FlowConfig(max_iters=400, record_every=50)
        theta, _ = _flow.subgradient_flow(fine, theta0, config)
    else:
        theta = _flow.direct_solve(fine)
    return Surrogate(
        basis=CHEBYSHEV,
        index_set=multi_index_set(fine_degree, problem.dim),
        coeffs=theta,
    )
