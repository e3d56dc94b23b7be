"""Spectral density estimation from filter-bank state covariances.

Given a stable input-to-state filter ``(A, B)`` and a state covariance
``Sigma``, find the spectral density closest to a prior in the
Itakura-Saito sense among all densities whose filtered state covariance is
``Sigma``.
"""

from .errors import (
    GridTooCoarse,
    Infeasible,
    InputError,
    NotConverged,
    SpecMomentError,
)
from .filterbank import FilterBank, eval_G, eval_G0, new_filter_bank, pick_bank, toeplitz_bank
from .momentspace import (
    apply_gamma,
    apply_gamma_star,
    feasibility_check,
    feasible_basis,
    lambda_to_X,
    sigma_to_H,
)
from .numerics import CircleGrid, GridFunction, circle_mean
from .oracle import levinson, moment_residual
from .solvers import NewtonConfig, SolveResult, solve_closed_form, solve_newton
from .spectra import (
    AllPolePrior,
    ConstantPrior,
    ExpressionPrior,
    MovingAveragePrior,
    SampledPrior,
    SpectralDensity,
    itakura_saito,
    realize_prior,
    spectral_density,
    spectrum_to_lags,
)

__all__ = [
    "AllPolePrior", "CircleGrid", "ConstantPrior", "ExpressionPrior", "FilterBank", "GridFunction",
    "GridTooCoarse", "Infeasible", "InputError", "MovingAveragePrior", "NewtonConfig", "NotConverged",
    "SampledPrior", "SolveResult", "SpecMomentError", "SpectralDensity", "apply_gamma", "apply_gamma_star",
    "circle_mean", "eval_G", "eval_G0", "feasibility_check", "feasible_basis", "itakura_saito",
    "lambda_to_X", "levinson", "moment_residual", "new_filter_bank", "pick_bank", "realize_prior",
    "sigma_to_H", "solve_closed_form", "solve_newton", "spectral_density", "spectrum_to_lags",
    "toeplitz_bank",
]
