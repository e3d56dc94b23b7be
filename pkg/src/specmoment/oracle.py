"""Reference computations that share no code path with the solvers.

The Levinson recursion gives the maximum-entropy (all-pole) spectrum for a
set of lags directly; finite differences check derivatives; the moment
residual checks a density against its target covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NotPD
from .filterbank import FilterBank
from .momentspace import apply_gamma
from .numerics import CircleGrid


@dataclass(frozen=True)
class ARModel:
    """Prediction-error filter ``1 + a_1 z^-1 + ... + a_p z^-p`` and innovation variance."""

    coefficients: np.ndarray
    noise_variance: float
    reflection: np.ndarray

    @property
    def order(self) -> int:
        return self.coefficients.size

    def spectrum(self, grid: CircleGrid) -> np.ndarray:
        """``sigma^2 / |1 + sum_k a_k e^{-ik theta}|^2`` as an ``(N,)`` array."""
        poly = np.concatenate([[1.0], self.coefficients])
        E = np.exp(-1j * np.outer(grid.nodes, np.arange(poly.size)))
        return self.noise_variance / np.abs(E @ poly) ** 2


def levinson(lags) -> ARModel:
    """Levinson-Durbin recursion on ``c_0 .. c_p``."""
    c = np.asarray(lags, dtype=float).ravel()
    if c.size == 0:
        raise InputError("need at least c_0")
    if c[0] <= 0:
        raise NotPD(f"c_0 = {c[0]:.6g} must be positive")
    p = c.size - 1
    a = np.zeros(0)
    err = c[0]
    ks = []
    for k in range(1, p + 1):
        acc = c[k] + a @ c[k - 1:0:-1]
        refl = -acc / err
        if abs(refl) >= 1.0:
            raise NotPD(f"reflection coefficient {k} has modulus {abs(refl):.6g} >= 1")
        a = np.concatenate([a + refl * a[::-1], [refl]])
        err *= 1.0 - refl * refl
        ks.append(refl)
    return ARModel(coefficients=a, noise_variance=float(err), reflection=np.array(ks))


def finite_diff_directional(f, x, direction, h: float) -> float:
    """Central difference ``(f(x + h d) - f(x - h d)) / (2h)``."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    return float((f(x + h * d) - f(x - h * d)) / (2.0 * h))


def moment_residual(Phi, Sigma, bank: FilterBank, grid: CircleGrid) -> float:
    """``||Gamma(Phi) - Sigma||_F / ||Sigma||_F``."""
    Sigma = np.asarray(Sigma, dtype=float)
    S = apply_gamma(Phi, bank, grid)
    return float(np.linalg.norm(S - Sigma) / np.linalg.norm(Sigma))
