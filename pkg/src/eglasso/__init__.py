"""Extreme graphical lasso for Husler-Reiss graphical models."""
from .hr_core import (
    DIAMOND_THETA,
    STAR_THETA,
    EdgeSet,
    diamond_graph,
    graph_from_theta,
    matrix_norms,
    shift_c,
    sigma_from_theta,
    sigma_from_variogram,
    sigma_k_from_variogram,
    star_graph,
    submatrix_drop,
    theta_from_sigma,
    theta_from_theta_k,
    theta_star_from_sigma,
    variogram_from_sigma,
)
from .solver import FitResult, SolverConfig, inner_lasso, kkt_residual, solve
from .tail import (
    ExceedanceSet,
    TailCovariance,
    aggregate_S,
    rank_transform,
    select_exceedances,
    sigma_k_hat,
    tail_covariance,
)

__version__ = "0.1.0"
