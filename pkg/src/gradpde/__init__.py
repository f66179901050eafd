"""Spectral variational PDE solving on Legendre grids with complexity classification.

The toolkit approximates PDE solutions by running discrete gradient flows on
Sobolev-cubature losses over polynomial surrogate spaces, then classifies each
solution as polynomial-time computable or a complexity-blowup candidate by
fitting its empirical convergence rate.
"""

from gradpde.grid import (
    BoundaryGrid,
    ManifoldSamples,
    MultiIndexSet,
    TensorGrid,
    boundary_grid,
    legendre_nodes_weights,
    manifold_samples,
    multi_index_set,
    tensor_grid,
)
from gradpde.basis import (
    Surrogate,
    Vandermonde,
    change_basis,
    cheb_project,
    chebyshev_eval,
    interpolate,
    lagrange_eval,
    vandermonde,
)
from gradpde.cubature import (
    CubatureOperator,
    boundary_weight_matrix,
    diff_matrix,
    diff_matrix_1d,
    sobolev_norm_sq,
    sobolev_weight_matrix,
)
from gradpde.loss import (
    FlowConstants,
    LossEval,
    LossProblem,
    eikonal_loss,
    evaluate_loss,
    flow_constants,
    poisson_loss,
    reconstruction_loss,
)
from gradpde.flow import (
    FlowConfig,
    FlowTrace,
    budget,
    direct_solve,
    euler_flow,
    subgradient_flow,
)
from gradpde.analysis import (
    ComplexityReport,
    RateFit,
    check_gradient,
    classify,
    error_decomposition,
    estimate_analyticity,
    fit_rates,
    probe_qgc_rsi,
)
from gradpde.oracles import (
    ManifoldDescriptor,
    fine_reference,
    l1_distance,
    manufactured_poisson,
    on_medial_axis,
)
from gradpde.estimators import ConvergenceRateClassifier, SpectralPDESolver

__all__ = [
    "BoundaryGrid",
    "ComplexityReport",
    "ConvergenceRateClassifier",
    "CubatureOperator",
    "FlowConfig",
    "FlowConstants",
    "FlowTrace",
    "LossEval",
    "LossProblem",
    "ManifoldDescriptor",
    "ManifoldSamples",
    "MultiIndexSet",
    "RateFit",
    "SpectralPDESolver",
    "Surrogate",
    "TensorGrid",
    "Vandermonde",
    "boundary_grid",
    "boundary_weight_matrix",
    "budget",
    "change_basis",
    "cheb_project",
    "chebyshev_eval",
    "check_gradient",
    "classify",
    "diff_matrix",
    "diff_matrix_1d",
    "direct_solve",
    "eikonal_loss",
    "error_decomposition",
    "estimate_analyticity",
    "euler_flow",
    "evaluate_loss",
    "fine_reference",
    "fit_rates",
    "flow_constants",
    "interpolate",
    "l1_distance",
    "lagrange_eval",
    "legendre_nodes_weights",
    "manifold_samples",
    "manufactured_poisson",
    "multi_index_set",
    "on_medial_axis",
    "poisson_loss",
    "probe_qgc_rsi",
    "reconstruction_loss",
    "sobolev_norm_sq",
    "sobolev_weight_matrix",
    "subgradient_flow",
    "tensor_grid",
    "vandermonde",
]
