"""Geometry of the moment operator.

``Gamma: Phi -> int G Phi G*`` maps spectral densities to state covariances;
its adjoint is ``Lambda -> G* Lambda G``.  This module provides both
operators, the algebraic feasibility test, the covariance-to-``H`` map, the
multiplier-to-``X`` map and a non-redundant coordinate basis for the dual
variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateKernel, Infeasible, InputError, NonRealResult
from .filterbank import FilterBank, eval_G, eval_G0
from .numerics import (
    CircleGrid,
    GridFunction,
    circle_mean,
    solve_discrete_lyapunov,
    solve_two_sided,
    sym_to_vec,
    symmetric_basis,
    vec_to_sym,
)

FEASIBILITY_RTOL = 1e-8
STRICT_RTOL = 1e-10
BASIS_RTOL = 1e-10
NONREAL_RTOL = 1e-10
H_RESIDUAL_RTOL = 1e-8

# range(Gamma) is grid independent once the grid resolves G; this fixed size
# keeps the basis identical across solves on different grids
BASIS_GRID = CircleGrid(1024)


def _herm(v: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(v, -1, -2))


def _values(Phi) -> np.ndarray:
    return Phi.values if hasattr(Phi, "values") else np.asarray(Phi)


def apply_gamma(Phi, bank: FilterBank, grid: CircleGrid) -> np.ndarray:
    """State covariance ``int G Phi G*`` (real symmetric ``n x n``)."""
    G = eval_G(bank, grid).values
    P = _values(Phi)
    if P.shape != (grid.size, bank.m, bank.m):
        raise InputError(f"density samples of shape {P.shape} do not match bank/grid")
    F = G @ P @ _herm(G)
    S = circle_mean(F)
    # relative to the integrand size: Sigma itself may vanish (kernel elements)
    scale = float(np.mean(np.linalg.norm(F, axis=(1, 2))))
    imag = np.linalg.norm(S.imag)
    if imag > NONREAL_RTOL * scale:
        raise NonRealResult(f"imaginary part {imag:.3g} of Gamma(Phi) exceeds tolerance "
                            "(density lacks conjugate symmetry?)")
    S = S.real
    return 0.5 * (S + S.T)


def apply_gamma_star(Lam, bank: FilterBank, grid: CircleGrid) -> GridFunction:
    """Pointwise ``G* Lambda G``."""
    Lam = np.asarray(Lam, dtype=float)
    G = eval_G(bank, grid).values
    return GridFunction.hermitian(grid, _herm(G) @ Lam @ G)


@dataclass(frozen=True)
class MomentVector:
    """``H`` with ``Sigma - A Sigma A' = B H + H' B'`` and ``H = B' Lambda``."""

    H: np.ndarray
    Y: np.ndarray
    residual: float


def sigma_to_H(Sigma, bank: FilterBank) -> MomentVector:
    """Minimal-norm ``H`` solving ``Sigma - A Sigma A' = B H + H' B'``.

    ``Y`` solves ``(B'B) Y + Y (B'B) = B' Delta B`` and
    ``H = (B'B)^{-1} (B' Delta - Y B')``.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    A, B = bank.A, bank.B
    if Sigma.shape != (bank.n, bank.n):
        raise InputError(f"Sigma has shape {Sigma.shape}, expected {(bank.n, bank.n)}")
    Delta = Sigma - A @ Sigma @ A.T
    BtB = B.T @ B
    Y = solve_two_sided(BtB, B.T @ Delta @ B)
    H = np.linalg.solve(BtB, B.T @ Delta - Y @ B.T)
    resid = np.linalg.norm(B @ H + H.T @ B.T - Delta) / max(np.linalg.norm(Sigma), np.finfo(float).tiny)
    if resid > H_RESIDUAL_RTOL:
        raise Infeasible(f"Sigma is not in range(Gamma): residual {resid:.3g} of B H + H' B' = Delta")
    return MomentVector(H=H, Y=0.5 * (Y + Y.T), residual=float(resid))


def theta_star_residual(H: np.ndarray, B: np.ndarray) -> tuple[float, np.ndarray]:
    """Least-squares fit of ``H = B' Lambda`` over symmetric ``Lambda``.

    Returns the relative residual and the fitted ``Lambda``.
    """
    n = B.shape[0]
    basis = symmetric_basis(n)
    M = np.column_stack([(B.T @ E).ravel() for E in basis])
    coef, *_ = np.linalg.lstsq(M, H.ravel(), rcond=None)
    Lam = vec_to_sym(coef, n)
    resid = np.linalg.norm(B.T @ Lam - H) / max(np.linalg.norm(H), np.finfo(float).tiny)
    return float(resid), Lam


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    strictly: bool
    rank_lhs: int
    rank_rhs: int
    H: MomentVector | None = None

    def to_dict(self) -> dict:
        out = {
            "feasible": self.feasible,
            "strictly": self.strictly,
            "rank_lhs": self.rank_lhs,
            "rank_rhs": self.rank_rhs,
        }
        if self.H is not None:
            out["H"] = self.H.H.tolist()
        return out


def _rank(M: np.ndarray, rtol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def feasibility_check(Sigma, bank: FilterBank, tol: float = FEASIBILITY_RTOL) -> FeasibilityReport:
    """Rank test for membership of ``Sigma`` in ``range(Gamma)``.

    ``rank [[Delta, B], [B', 0]] == rank [[0, B], [B', 0]] (= 2m)``;
    strict feasibility additionally requires ``Sigma`` positive definite.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (bank.n, bank.n):
        raise InputError(f"Sigma has shape {Sigma.shape}, expected {(bank.n, bank.n)}")
    if not np.allclose(Sigma, Sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Sigma).max())):
        raise InputError("Sigma is not symmetric")
    Sigma = 0.5 * (Sigma + Sigma.T)
    A, B = bank.A, bank.B
    m = bank.m
    Delta = Sigma - A @ Sigma @ A.T
    Zm = np.zeros((m, m))
    lhs = np.block([[Delta, B], [B.T, Zm]])
    rhs = np.block([[np.zeros_like(Delta), B], [B.T, Zm]])
    r_lhs = _rank(lhs, tol)
    r_rhs = _rank(rhs, tol)
    feasible = r_lhs == r_rhs
    lam = np.linalg.eigvalsh(Sigma)
    strictly = bool(feasible and lam[0] > STRICT_RTOL * lam[-1] and lam[-1] > 0)
    H = None
    if feasible:
        try:
            H = sigma_to_H(Sigma, bank)
        except Infeasible:
            feasible = strictly = False
    return FeasibilityReport(feasible=bool(feasible), strictly=strictly, rank_lhs=r_lhs, rank_rhs=r_rhs, H=H)


@dataclass(frozen=True)
class DualVariable:
    """``X`` (``n x m``) with its coordinates in a :class:`FeasibleBasis`."""

    X: np.ndarray
    coords: np.ndarray


def lambda_to_X(Lam, bank: FilterBank) -> np.ndarray:
    """``X = M B`` with ``M = A' M A + Lambda``.

    Then ``G* Lambda G = G0* X + X' G0`` on the circle.
    """
    Lam = np.asarray(Lam, dtype=float)
    M = solve_discrete_lyapunov(bank.A, 0.5 * (Lam + Lam.T))
    return M @ bank.B


@dataclass(frozen=True, eq=False)
class FeasibleBasis:
    """Coordinates for the dual variable.

    ``basis_X[i]`` is the image of ``basis_Lambda[i]`` under
    :func:`lambda_to_X`; the ``basis_X`` are Frobenius-orthonormal and
    ``basis_Lambda`` spans ``range(Gamma)``.
    """

    basis_Lambda: np.ndarray = field(repr=False)  # (d, n, n)
    basis_X: np.ndarray = field(repr=False)       # (d, n, m)
    singular_values: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.basis_X.shape[0]

    def to_X(self, coords) -> np.ndarray:
        return np.tensordot(np.asarray(coords, dtype=float), self.basis_X, axes=1)

    def to_Lambda(self, coords) -> np.ndarray:
        return np.tensordot(np.asarray(coords, dtype=float), self.basis_Lambda, axes=1)

    def coords_of(self, X) -> np.ndarray:
        """Frobenius projection of an ``n x m`` matrix onto the basis."""
        return np.tensordot(self.basis_X, np.asarray(X), axes=([1, 2], [0, 1]))

    def dual_variable(self, coords) -> DualVariable:
        c = np.asarray(coords, dtype=float).copy()
        return DualVariable(X=self.to_X(c), coords=c)


def _gamma_star_matrix(bank: FilterBank, grid: CircleGrid) -> np.ndarray:
    """Real matrix of ``Lambda -> samples of G* Lambda G`` in the symmetric basis."""
    G = eval_G(bank, grid).values
    Gh = _herm(G)
    cols = []
    for E in symmetric_basis(bank.n):
        F = (Gh @ E @ G) / np.sqrt(grid.size)
        cols.append(np.concatenate([F.real.ravel(), F.imag.ravel()]))
    return np.column_stack(cols)


def feasible_basis(bank: FilterBank, grid: CircleGrid = BASIS_GRID) -> FeasibleBasis:
    """Basis of ``range(Gamma)`` and its images in the ``X`` parametrization."""
    key = ("basis", grid.size)
    if key in bank._cache:
        return bank._cache[key]
    K = _gamma_star_matrix(bank, grid)
    _, s, Vt = np.linalg.svd(K, full_matrices=False)
    d = int(np.sum(s > BASIS_RTOL * s[0]))
    n = bank.n
    lams = np.array([vec_to_sym(v, n) for v in Vt[:d]])
    Xs = np.array([lambda_to_X(L, bank) for L in lams])
    V = Xs.reshape(d, -1).T
    Qm, R = np.linalg.qr(V)
    Rinv = np.linalg.inv(R)
    basis_X = (Qm.T).reshape(d, n, bank.m)
    basis_L = np.tensordot(Rinv.T, lams, axes=1)
    basis_L = 0.5 * (basis_L + np.swapaxes(basis_L, 1, 2))
    fb = FeasibleBasis(basis_Lambda=basis_L, basis_X=basis_X, singular_values=s)
    bank._cache[key] = fb
    return fb


def subspace_dimensions(bank: FilterBank) -> dict:
    """Compare ``dim range(Gamma)`` with ``dim {X : B'X symmetric}``.

    The two coincide whenever ``B`` has full column rank; the diagnostic
    reports both numerically along with the subspace gap.
    """
    fb = feasible_basis(bank)
    n, m = bank.n, bank.m
    B = bank.B
    # constraints: skew part of B'X vanishes
    rows = []
    for i in range(m):
        for j in range(i + 1, m):
            E = np.zeros((m, m))
            E[i, j], E[j, i] = 1.0, -1.0
            # tr(E' B'X) = <B E, X>
            rows.append((B @ E).ravel())
    if rows:
        C = np.array(rows)
        s = np.linalg.svd(C, compute_uv=False)
        dim_sym = n * m - int(np.sum(s > 1e-10 * s[0]))
        gap = float(np.max(np.abs(fb.basis_X.reshape(fb.d, -1) @ C.T)))
    else:
        dim_sym = n * m
        gap = 0.0
    return {"dim_range_gamma": fb.d, "dim_BtX_symmetric": dim_sym, "span_gap": gap}


def ker_gamma_perturbation(seed: int, bank: FilterBank, grid: CircleGrid,
                           degree: int | None = None) -> GridFunction:
    """Random real-coefficient Hermitian trigonometric polynomial in ``ker Gamma``.

    ``delta(theta) = D0 + sum_{k=1..K} (D_k e^{ik theta} + D_k' e^{-ik theta})``
    with ``D0`` symmetric, projected onto the null space of ``Gamma``
    restricted to that family.  Scaled so the largest sample has unit
    spectral norm.
    """
    m, n = bank.m, bank.n
    K = degree if degree is not None else n + 3
    if K < 0:
        raise InputError("degree must be nonnegative")
    theta = grid.nodes
    atoms = []
    for E in symmetric_basis(m):
        atoms.append(np.broadcast_to(E.astype(complex), (grid.size, m, m)))
    for k in range(1, K + 1):
        e = np.exp(1j * k * theta)[:, None, None]
        for a in range(m):
            for b in range(m):
                D = np.zeros((m, m))
                D[a, b] = 1.0
                atoms.append(D[None] * e + D.T[None] * np.conj(e))
    L = np.column_stack([sym_to_vec(apply_gamma(F, bank, grid)) for F in atoms])
    _, s, Vt = np.linalg.svd(L, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
    null = Vt[rank:]
    if null.shape[0] == 0:
        raise DegenerateKernel(f"no kernel of Gamma among degree-{K} trigonometric polynomials")
    rng = np.random.default_rng(seed)
    w = null.T @ rng.standard_normal(null.shape[0])
    vals = np.tensordot(w, np.array(atoms), axes=1)
    vals = 0.5 * (vals + _herm(vals))
    scale = np.max(np.linalg.norm(vals, ord=2, axis=(1, 2)))
    return GridFunction.hermitian(grid, vals / scale)
