"""Input-to-state filter banks ``x(t+1) = A x(t) + B y(t)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicatePole, InputError, RankDeficientB, Unreachable, Unstable, UnstablePole
from .numerics import STABILITY_MARGIN, CircleGrid, GridFunction, spectral_radius

RANK_TOL = 1e-10


def _numerical_rank(M: np.ndarray, rtol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Validated pair ``(A, B)`` with transfer function ``G(z) = z (zI - A)^{-1} B``.

    Use :func:`new_filter_bank` (or the canonical constructors) rather than
    instantiating directly; direct construction runs the same validation.
    """

    A: np.ndarray
    B: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim == 0:
            B = B.reshape(1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError(f"A must be square, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise InputError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        n, m = B.shape
        if m > n:
            raise InputError(f"B has more columns ({m}) than rows ({n})")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise InputError("A and B must be finite")
        rho = spectral_radius(A)
        if rho > 1.0 - STABILITY_MARGIN:
            raise Unstable(f"spectral radius of A is {rho:.12g}; must be <= 1 - {STABILITY_MARGIN:g}")
        if _numerical_rank(B, RANK_TOL) < m:
            raise RankDeficientB(f"B (shape {B.shape}) is not of full column rank")
        blocks = [B]
        for _ in range(n - 1):
            blocks.append(A @ blocks[-1])
        if _numerical_rank(np.hstack(blocks), RANK_TOL) < n:
            raise Unreachable("(A, B) is not a reachable pair")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def G(self, grid: CircleGrid) -> GridFunction:
        return eval_G(self, grid)

    def G0(self, grid: CircleGrid) -> GridFunction:
        return eval_G0(self, grid)


def new_filter_bank(A, B) -> FilterBank:
    return FilterBank(A, B)


def eval_G(bank: FilterBank, grid: CircleGrid) -> GridFunction:
    """Samples ``G(theta_j) = (I - e^{-i theta_j} A)^{-1} B`` (cached per grid size)."""
    key = ("G", grid.size)
    if key not in bank._cache:
        n = bank.n
        z_inv = np.exp(-1j * grid.nodes)
        lhs = np.eye(n)[None, :, :] - z_inv[:, None, None] * bank.A[None, :, :]
        rhs = np.broadcast_to(bank.B.astype(complex), (grid.size, n, bank.m))
        bank._cache[key] = GridFunction(grid, np.linalg.solve(lhs, rhs))
    return bank._cache[key]


def eval_G0(bank: FilterBank, grid: CircleGrid) -> GridFunction:
    """``G0 = G - B/2``."""
    key = ("G0", grid.size)
    if key not in bank._cache:
        G = eval_G(bank, grid)
        bank._cache[key] = GridFunction(grid, G.values - 0.5 * bank.B[None, :, :])
    return bank._cache[key]


def toeplitz_bank(n: int) -> FilterBank:
    """Tapped delay line: ``A`` the down-shift, ``B = e_1``.

    The state covariance of this bank is the Toeplitz matrix of lags.
    """
    if n < 1:
        raise InputError("n must be at least 1")
    A = np.eye(n, k=-1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return FilterBank(A, B)


def pick_bank(poles) -> FilterBank:
    """First-order sections ``z / (z - p_k)``; state covariance is a Pick matrix."""
    p = np.asarray(poles, dtype=float).ravel()
    if p.size == 0:
        raise InputError("need at least one pole")
    if np.any(np.abs(p) >= 1.0 - STABILITY_MARGIN):
        raise UnstablePole(f"poles must lie strictly inside (-1, 1): {p.tolist()}")
    if np.unique(p).size != p.size:
        raise DuplicatePole(f"poles must be distinct: {p.tolist()}")
    return FilterBank(np.diag(p), np.ones((p.size, 1)))
