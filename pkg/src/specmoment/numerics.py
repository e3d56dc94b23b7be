"""Unit-circle quadrature, grid-sampled matrix functions and structured solvers.

All integrals over the circle use the normalized measure ``dtheta / 2pi``,
realized by the trapezoidal rule on a uniform grid.  For smooth periodic
integrands this rule converges exponentially in the number of nodes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import InputError, NotPositiveDefinite, NotSPD, UnstableMatrix

DEFAULT_GRID_SIZE = 4096
GRID_ENV_VAR = "SPECMOMENT_GRID"

# relative pivot floor for pointwise Cholesky
PIVOT_FLOOR = 1e-12
STABILITY_MARGIN = 1e-9


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def default_grid_size() -> int:
    """Grid size from ``SPECMOMENT_GRID`` if set, else 4096."""
    raw = os.environ.get(GRID_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_GRID_SIZE
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{GRID_ENV_VAR}={raw!r} is not an integer") from None
    if not _is_power_of_two(n):
        raise InputError(f"{GRID_ENV_VAR}={n} is not a positive power of two")
    return n


@dataclass(frozen=True)
class CircleGrid:
    """Uniform grid ``theta_j = 2*pi*j/N - pi`` on ``[-pi, pi)``."""

    size: int

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or not _is_power_of_two(int(self.size)):
            raise InputError(f"grid size must be a power of two, got {self.size!r}")
        if self.size < 4:
            raise InputError(f"grid size must be at least 4, got {self.size}")

    @property
    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.size) / self.size - np.pi

    def refined(self) -> "CircleGrid":
        return CircleGrid(2 * self.size)

    def mirror_index(self) -> np.ndarray:
        """Index of the node at ``-theta_j`` for each node ``j``."""
        return (-np.arange(self.size)) % self.size


def pairwise_sum(values: np.ndarray) -> np.ndarray:
    """Sum along axis 0 by a fixed binary tree.

    The association order depends only on the length, so results are
    bit-reproducible regardless of how the samples were produced.
    """
    a = np.asarray(values)
    if a.shape[0] == 0:
        raise InputError("cannot reduce an empty sample set")
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a[0:-1:2] + a[1::2], a[-1:]], axis=0)
        else:
            a = a[0::2] + a[1::2]
    return a[0]


@dataclass(frozen=True)
class GridFunction:
    """Matrix-valued function sampled on a :class:`CircleGrid`.

    ``values`` has shape ``(N, p, q)``.
    """

    grid: CircleGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.ndim != 3:
            raise InputError(f"grid samples must have shape (N, p, q), got {v.shape}")
        if v.shape[0] != self.grid.size:
            raise InputError(f"{v.shape[0]} samples for a grid of size {self.grid.size}")
        v = v.astype(complex)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def hermitian(cls, grid: CircleGrid, values) -> "GridFunction":
        """Construct with each sample replaced by its Hermitian part."""
        v = np.asarray(values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None, None]
        return cls(grid, 0.5 * (v + np.conj(np.swapaxes(v, -1, -2))))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    def mean(self) -> np.ndarray:
        return circle_mean(self)

    def conj_mirror_gap(self) -> float:
        """Largest deviation from ``f(-theta) = conj(f(theta))``."""
        v = self.values
        return float(np.max(np.abs(v[self.grid.mirror_index()] - np.conj(v))))


def circle_mean(f) -> np.ndarray:
    """Normalized circle integral ``(1/N) sum_j f(theta_j)``.

    Accepts a :class:`GridFunction` or a raw sample array (axis 0 = nodes).
    """
    values = f.values if isinstance(f, GridFunction) else np.asarray(f)
    return pairwise_sum(values) / values.shape[0]


def pointwise_cholesky(values: np.ndarray, grid: CircleGrid | None = None,
                       error=NotPositiveDefinite) -> np.ndarray:
    """Cholesky factors of a stack of Hermitian matrices.

    A node fails if factorization breaks down or a squared pivot falls below
    ``PIVOT_FLOOR`` times the largest diagonal entry of that sample.
    """
    v = np.asarray(values)
    failed = None
    try:
        L = np.linalg.cholesky(v)
    except np.linalg.LinAlgError:
        L = None
    if L is not None:
        piv = np.abs(np.diagonal(L, axis1=-2, axis2=-1)) ** 2
        scale = np.max(np.abs(np.diagonal(v, axis1=-2, axis2=-1).real), axis=-1)
        bad = np.any(~np.isfinite(piv), axis=-1) | np.any(piv <= PIVOT_FLOOR * scale[:, None], axis=-1)
        if np.any(bad):
            failed = int(np.argmax(bad))
    else:
        for j in range(v.shape[0]):
            try:
                np.linalg.cholesky(v[j])
            except np.linalg.LinAlgError:
                failed = j
                break
        if failed is None:  # pragma: no cover - batched and looped LAPACK disagree
            failed = 0
    if failed is not None:
        theta = float(grid.nodes[failed]) if grid is not None else float("nan")
        raise error(failed, theta)
    return L


def pointwise_inverse_from_cholesky(L: np.ndarray) -> np.ndarray:
    eye = np.broadcast_to(np.eye(L.shape[-1]), L.shape)
    Linv = np.linalg.solve(L, eye)
    inv = np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    return 0.5 * (inv + np.conj(np.swapaxes(inv, -1, -2)))


def logdet_from_cholesky(L: np.ndarray) -> np.ndarray:
    return 2.0 * np.sum(np.log(np.abs(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)


def logdet_mean(Q) -> float:
    """Mean over the grid of ``log det Q(theta)``.

    Raises :class:`NotPositiveDefinite` naming the first failing node.
    """
    grid = Q.grid if isinstance(Q, GridFunction) else None
    values = Q.values if isinstance(Q, GridFunction) else np.asarray(Q)
    L = pointwise_cholesky(values, grid)
    return float(circle_mean(logdet_from_cholesky(L)))


def spectral_radius(A: np.ndarray) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def solve_discrete_lyapunov(A, W) -> np.ndarray:
    """Solve ``M - A' M A = W`` for symmetric ``M``.

    Parameters
    ----------
    A : (n, n) array_like
        Strictly stable matrix.
    W : (n, n) array_like
        Symmetric right-hand side.

    Returns
    -------
    M : (n, n) ndarray
        The unique solution, symmetrized.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if A.shape[0] != A.shape[1] or W.shape != A.shape:
        raise InputError(f"incompatible shapes A{A.shape}, W{W.shape}")
    rho = spectral_radius(A)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise UnstableMatrix(f"spectral radius {rho:.12g} is not below 1 - {STABILITY_MARGIN:g}")
    # scipy solves X - a X a^H = q; with a = A' this is our equation
    M = sla.solve_discrete_lyapunov(A.T, W, method="bilinear" if A.shape[0] > 10 else "direct")
    M = np.real_if_close(M)
    return 0.5 * (M + M.T)


def solve_two_sided(P, R) -> np.ndarray:
    """Symmetric solution of ``P Y + Y P = R`` for SPD ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if P.shape != R.shape or P.shape[0] != P.shape[1]:
        raise InputError(f"incompatible shapes P{P.shape}, R{R.shape}")
    lam, U = np.linalg.eigh(0.5 * (P + P.T))
    if lam[0] <= 0.0:
        raise NotSPD(f"P has non-positive eigenvalue {lam[0]:.6g}")
    Rt = U.T @ R @ U
    Y = U @ (Rt / (lam[:, None] + lam[None, :])) @ U.T
    return 0.5 * (Y + Y.T)


def symmetric_basis(n: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of real symmetric ``n x n`` matrices."""
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(E)
    return basis


def sym_to_vec(S: np.ndarray) -> np.ndarray:
    """Coordinates of ``S`` in :func:`symmetric_basis`."""
    n = S.shape[0]
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return S[iu] * w


def vec_to_sym(v: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, 1.0 / np.sqrt(2.0))
    S = np.zeros((n, n))
    S[iu] = v * w
    return S + np.triu(S, 1).T


def relative_gap(a, b) -> float:
    """``|a - b| / (1 + |b|)`` in the Frobenius norm."""
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b)))
