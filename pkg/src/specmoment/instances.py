"""Seeded random problem instances for tests and experiment scripts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .filterbank import FilterBank
from .momentspace import apply_gamma
from .numerics import CircleGrid, solve_discrete_lyapunov, spectral_radius
from .spectra import SampledPrior, SpectralDensity, spectral_density


def random_bank(rng: np.random.Generator, n: int, m: int, radius=(0.2, 0.8),
                max_cond: float = 1e4) -> FilterBank:
    """Stable reachable bank with spectral radius drawn from ``radius``.

    Draws whose reachability Gramian has condition number above ``max_cond``
    are rejected; nearly unreachable banks make every moment problem
    ill-conditioned.
    """
    for _ in range(1000):
        A = rng.standard_normal((n, n))
        rho = spectral_radius(A)
        if rho == 0.0:
            continue
        A *= rng.uniform(*radius) / rho
        B = rng.standard_normal((n, m))
        try:
            bank = FilterBank(A, B)
        except InputError:
            continue
        if np.linalg.cond(solve_discrete_lyapunov(A.T, B @ B.T)) <= max_cond:
            return bank
    raise RuntimeError("could not draw a reachable bank")  # pragma: no cover


def random_density(rng: np.random.Generator, m: int, grid: CircleGrid, degree: int = 2,
                   floor: float = 0.2) -> SpectralDensity:
    """``W W* + floor I`` with ``W`` a real-coefficient matrix polynomial in ``e^{-i theta}``."""
    Wk = rng.standard_normal((degree + 1, m, m)) / np.sqrt(degree + 1)
    E = np.exp(-1j * np.outer(grid.nodes, np.arange(degree + 1)))
    W = np.tensordot(E, Wk, axes=1)
    vals = W @ np.conj(np.swapaxes(W, -1, -2)) + floor * np.eye(m)
    return spectral_density(grid, vals)


@dataclass
class Instance:
    bank: FilterBank
    Sigma: np.ndarray
    witness: SpectralDensity
    prior: SampledPrior

    @property
    def prior_density(self) -> SpectralDensity:
        return spectral_density(self.prior.grid, self.prior.values)


def random_instance(seed: int, grid: CircleGrid, max_n: int = 6, max_m: int = 2) -> Instance:
    """Bank, ``Sigma = Gamma(witness)`` and a coercive prior, all from ``seed``."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(max(m, 2), max_n + 1))
    bank = random_bank(rng, n, m)
    witness = random_density(rng, m, grid)
    Sigma = apply_gamma(witness, bank, grid)
    prior = random_density(rng, m, grid, degree=1, floor=0.5)
    return Instance(bank=bank, Sigma=Sigma, witness=witness,
                    prior=SampledPrior(grid, np.array(prior.values)))
