"""Dual Newton solver and closed-form solution.

The optimal density has the form ``Phi = Q^{-1}`` with
``Q = Psi^{-1} + G0* X + X' G0``, where ``X`` minimizes the strictly convex
functional ``J(X) = tr(HX + X'H') - int log det Q``.  ``X`` is parametrized
by coordinates in :class:`~specmoment.momentspace.FeasibleBasis`, which
removes all redundancy so the coordinate Hessian is nonsingular.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridTooCoarse,
    Infeasible,
    InputError,
    NotConverged,
    NotInDomain,
    NotPositiveDefinite,
    NotPositiveOnCircle,
    SingularSigma,
)
from .filterbank import FilterBank, eval_G, eval_G0
from .momentspace import (
    DualVariable,
    FeasibleBasis,
    apply_gamma,
    feasibility_check,
    feasible_basis,
)
from .numerics import (
    CircleGrid,
    GridFunction,
    circle_mean,
    default_grid_size,
    logdet_from_cholesky,
    pointwise_cholesky,
    pointwise_inverse_from_cholesky,
    relative_gap,
    symmetric_basis,
)
from .spectra import SampledPrior, SpectralDensity, itakura_saito, realize_prior, spectral_density

log = logging.getLogger(__name__)

# eigenvalues below this fraction of the largest are treated as roundoff
HESSIAN_CLIP = 1e-12


def _herm(v):
    return np.conj(np.swapaxes(v, -1, -2))


@dataclass
class NewtonConfig:
    grid_size: int = field(default_factory=default_grid_size)
    grad_tol: float = 1e-10
    max_iter: int = 100
    armijo_slope: float = 1e-4
    step_shrink: float = 0.5
    pd_margin: float = 1e-9
    max_backtracks: int = 60
    refine_tol: float = 1e-9
    refine_check: bool = True

    def __post_init__(self):
        CircleGrid(self.grid_size)  # validates power of two >= 4
        for name in ("grad_tol", "max_iter", "armijo_slope", "pd_margin", "max_backtracks", "refine_tol"):
            if not getattr(self, name) > 0:
                raise InputError(f"NewtonConfig.{name} must be positive")
        if not 0.0 < self.step_shrink < 1.0:
            raise InputError("NewtonConfig.step_shrink must lie in (0, 1)")


@dataclass
class SolveResult:
    Phi: SpectralDensity
    divergence: float | None
    stationarity_residual: float
    moment_residual: float
    iterations: int
    converged: bool
    method: str
    X: DualVariable | None = None
    Lambda: np.ndarray | None = None
    objective: float | None = None
    refinement_gap: float | None = None
    kernel_component: float | None = None
    history: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "divergence": self.divergence,
            "moment_residual": self.moment_residual,
            "stationarity_residual": self.stationarity_residual,
            "refinement_gap": self.refinement_gap,
            "grid_size": self.Phi.grid.size,
        }


# -- pointwise pieces -------------------------------------------------------

def _psi_inverse(Psi: SpectralDensity) -> np.ndarray:
    L = pointwise_cholesky(Psi.values, Psi.grid)
    return pointwise_inverse_from_cholesky(L)


def _q_values(X, Psi_inv: np.ndarray, G0: np.ndarray) -> np.ndarray:
    S = _herm(G0) @ np.asarray(X, dtype=float)
    return Psi_inv + S + _herm(S)


def assemble_Q(X, Psi: SpectralDensity, bank: FilterBank, grid: CircleGrid) -> GridFunction:
    """``Q = Psi^{-1} + G0* X + X' G0`` on the grid."""
    X = X.X if isinstance(X, DualVariable) else X
    return GridFunction.hermitian(grid, _q_values(X, _psi_inverse(Psi), eval_G0(bank, grid).values))


class _Point:
    """Factorized ``Q`` at one ``X``; raises :class:`NotInDomain` outside the cone."""

    def __init__(self, X, Psi_inv, G0, grid, pd_margin: float | None = None):
        self.X = np.asarray(X, dtype=float)
        self.Q = _q_values(self.X, Psi_inv, G0)
        self.Q = 0.5 * (self.Q + _herm(self.Q))
        self.L = pointwise_cholesky(self.Q, grid, error=NotInDomain)
        if pd_margin is not None and self.Q.shape[-1] > 1:
            eig = np.linalg.eigvalsh(self.Q)
            bad = eig[:, 0] < pd_margin * eig[:, -1]
            if np.any(bad):
                j = int(np.argmax(bad))
                raise NotInDomain(j, float(grid.nodes[j]), "Q too close to singular")
        self.logdet = float(circle_mean(logdet_from_cholesky(self.L)))
        self.Qinv = pointwise_inverse_from_cholesky(self.L)
        self.G0 = G0

    def objective(self, H: np.ndarray) -> float:
        return float(2.0 * np.trace(H @ self.X) - self.logdet)

    def pairing(self) -> np.ndarray:
        """``int Q^{-1} G0*`` (real ``m x n``)."""
        return circle_mean(self.Qinv @ _herm(self.G0)).real

    def gradient(self, H: np.ndarray) -> np.ndarray:
        return 2.0 * (H - self.pairing()).T

    def hessian_apply(self, dX) -> np.ndarray:
        S = _herm(self.G0) @ np.asarray(dX, dtype=float)
        dQ = S + _herm(S)
        R = self.Qinv @ dQ @ self.Qinv @ _herm(self.G0)
        return 2.0 * circle_mean(R).real.T


def _point(X, Psi, bank, grid):
    return _Point(X, _psi_inverse(Psi), eval_G0(bank, grid).values, grid)


def objective_J(X, H, Psi: SpectralDensity, bank: FilterBank, grid: CircleGrid) -> float:
    """``tr(HX + X'H') - int log det Q(X)``."""
    X = X.X if isinstance(X, DualVariable) else X
    return _point(X, Psi, bank, grid).objective(np.asarray(H, dtype=float))


def gradient_J(X, H, Psi: SpectralDensity, bank: FilterBank, grid: CircleGrid,
               basis: FeasibleBasis | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates (in ``basis``) and raw ``n x m`` gradient ``2 (H - int Q^{-1} G0*)'``."""
    X = X.X if isinstance(X, DualVariable) else X
    basis = basis or feasible_basis(bank)
    raw = _point(X, Psi, bank, grid).gradient(np.asarray(H, dtype=float))
    return basis.coords_of(raw), raw


def hessian_apply(X, dX, Psi: SpectralDensity, bank: FilterBank, grid: CircleGrid) -> np.ndarray:
    """Riesz representer of ``dY -> int tr(Q^{-1} dQ(dX) Q^{-1} dQ(dY))``."""
    X = X.X if isinstance(X, DualVariable) else X
    return _point(X, Psi, bank, grid).hessian_apply(dX)


def coordinate_hessian(point: _Point, basis: FeasibleBasis) -> np.ndarray:
    """``d x d`` Hessian assembled column by column from :meth:`_Point.hessian_apply`."""
    cols = [basis.coords_of(point.hessian_apply(Xi)) for Xi in basis.basis_X]
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def hessian_matrix(X, Psi, bank, grid, basis: FeasibleBasis | None = None) -> np.ndarray:
    X = X.X if isinstance(X, DualVariable) else X
    return coordinate_hessian(_point(X, Psi, bank, grid), basis or feasible_basis(bank))


def stationarity_residual(pairing: np.ndarray, H: np.ndarray, basis: FeasibleBasis) -> tuple[float, float]:
    """Residual of ``int Q^{-1} G0* = H`` modulo ``ker Theta``.

    For ``m > 1`` any two solutions of ``B H + H' B' = Delta`` differ by
    ``K B'`` with ``K`` skew, and ``int Phi G0*`` is such a solution for every
    density matching the moments; only the component in ``range(Theta*)`` is
    meaningful.  Returns ``(projected, kernel)`` norms, each divided by
    ``1 + ||H||``.
    """
    D = (pairing - H).T
    c = basis.coords_of(D)
    proj = basis.to_X(c)
    scale = 1.0 + np.linalg.norm(H)
    return float(np.linalg.norm(proj) / scale), float(np.linalg.norm(D - proj) / scale)


# -- Newton -----------------------------------------------------------------

def _as_prior_spec(prior):
    if isinstance(prior, SpectralDensity):
        return SampledPrior(prior.grid, np.array(prior.values))
    return prior


def _strict_check(Sigma, bank):
    report = feasibility_check(Sigma, bank)
    if not report.strictly:
        raise Infeasible("Sigma is not strictly feasible "
                         f"(feasible={report.feasible}, rank {report.rank_lhs} vs {report.rank_rhs}, "
                         "or not positive definite)")
    return report


def _density_from_Q(Q: np.ndarray, grid: CircleGrid, L=None) -> SpectralDensity:
    L = pointwise_cholesky(Q, grid) if L is None else L
    return spectral_density(grid, pointwise_inverse_from_cholesky(L))


def _refinement(X, H, prior_spec, bank, grid, Sigma, values_N) -> float:
    """Largest relative change of the reported integrals when the grid is doubled."""
    fine = grid.refined()
    Psi2 = realize_prior(prior_spec, fine)
    try:
        p2 = _Point(X, _psi_inverse(Psi2), eval_G0(bank, fine).values, fine)
    except NotPositiveDefinite:
        return float("inf")
    Phi2 = _density_from_Q(p2.Q, fine, p2.L)
    S2 = apply_gamma(Phi2, bank, fine)
    gaps = [relative_gap(values_N["objective"], p2.objective(H)),
            relative_gap(values_N["moments"], S2)]
    if values_N.get("divergence") is not None:
        gaps.append(relative_gap(values_N["divergence"], itakura_saito(Phi2, Psi2)))
    return max(gaps)


def solve_newton(Sigma, prior, bank: FilterBank, cfg: NewtonConfig | None = None) -> SolveResult:
    """Minimize ``J`` by damped Newton from ``X = 0``.

    Parameters
    ----------
    Sigma : (n, n) array_like
        Strictly feasible state covariance.
    prior : prior specification or SpectralDensity
        Coercive prior ``Psi``; a specification is needed to re-sample it for
        the grid-refinement check (densities are resampled by interpolation).
    bank : FilterBank
    cfg : NewtonConfig, optional

    Returns
    -------
    SolveResult

    Raises
    ------
    Infeasible, NotConverged, GridTooCoarse
    """
    cfg = cfg or NewtonConfig()
    grid = CircleGrid(cfg.grid_size)
    Sigma = np.asarray(Sigma, dtype=float)
    report = _strict_check(Sigma, bank)
    H = report.H.H
    prior_spec = _as_prior_spec(prior)
    Psi = realize_prior(prior_spec, grid)
    if Psi.m != bank.m:
        raise InputError(f"prior is {Psi.m}x{Psi.m} but the bank has m={bank.m}")
    Psi_inv = _psi_inverse(Psi)
    G0 = eval_G0(bank, grid).values
    basis = feasible_basis(bank)
    tol = cfg.grad_tol * (1.0 + np.linalg.norm(H))

    coords = np.zeros(basis.d)
    pt = _Point(basis.to_X(coords), Psi_inv, G0, grid)
    J = pt.objective(H)
    history = []
    converged = False
    it = 0
    while True:
        g = basis.coords_of(pt.gradient(H))
        gnorm = float(np.linalg.norm(g))
        entry = {"iteration": it, "objective": J, "grad_norm": gnorm}
        history.append(entry)
        log.debug("newton it=%d J=%.16g |g|=%.3g", it, J, gnorm)
        if gnorm <= tol:
            converged = True
            break
        if it >= cfg.max_iter:
            break
        K = coordinate_hessian(pt, basis)
        entry["hessian_asymmetry"] = float(np.linalg.norm(K - K.T) / max(np.linalg.norm(K), 1e-300))
        Ks = 0.5 * (K + K.T)
        eig = np.linalg.eigvalsh(Ks)
        entry["hessian_min_eig"] = float(eig[0])
        if eig[0] > -HESSIAN_CLIP * eig[-1]:
            # roundoff can push the smallest eigenvalues slightly negative
            lam, V = np.linalg.eigh(Ks)
            lam = np.maximum(lam, HESSIAN_CLIP * eig[-1])
            step = -V @ ((V.T @ g) / lam)
            if eig[0] <= 0:
                entry["hessian_clipped"] = True
        else:
            log.warning("coordinate Hessian not positive definite (min eig %.3g); using -g", eig[0])
            step = -g
        slope = float(g @ step)
        t = 1.0
        accepted = None
        for _ in range(cfg.max_backtracks):
            try:
                trial = _Point(basis.to_X(coords + t * step), Psi_inv, G0, grid, cfg.pd_margin)
            except NotInDomain:
                t *= cfg.step_shrink
                continue
            Jt = trial.objective(H)
            if Jt <= J + cfg.armijo_slope * t * slope:
                accepted = trial
                break
            # decrease below the resolution of J: fall back to gradient decrease
            if -slope <= 1e-13 * (1.0 + abs(J)) and t == 1.0:
                gt = np.linalg.norm(basis.coords_of(trial.gradient(H)))
                if gt < gnorm:
                    accepted = trial
                    entry["roundoff_step"] = True
                    break
            t *= cfg.step_shrink
        if accepted is None:
            log.warning("line search failed at iteration %d (|g|=%.3g)", it, gnorm)
            break
        entry["step"] = t
        coords = coords + t * step
        pt = accepted
        J = accepted.objective(H)
        it += 1

    Phi = _density_from_Q(pt.Q, grid, pt.L)
    moments = apply_gamma(Phi, bank, grid)
    moment_res = float(np.linalg.norm(moments - Sigma) / np.linalg.norm(Sigma))
    stat_res, kernel_part = stationarity_residual(pt.pairing(), H, basis)
    divergence = itakura_saito(Phi, Psi)
    X = basis.dual_variable(coords)
    result = SolveResult(
        Phi=Phi, divergence=divergence, stationarity_residual=stat_res, moment_residual=moment_res,
        iterations=it, converged=converged, method="newton", X=X, Lambda=basis.to_Lambda(coords),
        objective=J, history=history, kernel_component=kernel_part,
    )
    if cfg.refine_check:
        gap = _refinement(X.X, H, prior_spec, bank, grid, Sigma,
                          {"objective": J, "moments": moments, "divergence": divergence})
        result.refinement_gap = gap
        if gap > cfg.refine_tol:
            raise GridTooCoarse(f"grid N={grid.size} too coarse: integrals change by {gap:.3g} "
                                f"relative on refinement (tolerance {cfg.refine_tol:g})", gap)
    if not converged or moment_res > 1e-8:
        result.converged = False
        raise NotConverged(f"Newton stopped after {it} iterations with |g|={history[-1]['grad_norm']:.3g} "
                           f"(tolerance {tol:.3g}), moment residual {moment_res:.3g}", result)
    return result


# -- closed form ------------------------------------------------------------

def closed_form_multiplier(Sigma, bank: FilterBank) -> tuple[np.ndarray, np.ndarray, float]:
    """``Lambda = S^{-1} B (B' S^{-1} B)^{-1} B' S^{-1}`` and its factor ``C``.

    Returns ``(Lambda, C, r)`` where ``C = S^{-1} B (B' S^{-1} B)^{-1/2}``
    and ``r`` is the relative residual of the stationarity identity
    ``B' C C' = B' S^{-1}``.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    B = bank.B
    try:
        Lc = np.linalg.cholesky(0.5 * (Sigma + Sigma.T))
    except np.linalg.LinAlgError:
        raise SingularSigma("Sigma is not positive definite") from None
    if np.min(np.abs(np.diag(Lc))) ** 2 <= 1e-14 * np.max(np.abs(np.diag(Sigma))):
        raise SingularSigma("Sigma is numerically singular")
    Si = np.linalg.inv(Sigma)
    Si = 0.5 * (Si + Si.T)
    W = B.T @ Si @ B
    W = 0.5 * (W + W.T)
    lam, U = np.linalg.eigh(W)
    W_inv = (U / lam) @ U.T
    W_isqrt = (U / np.sqrt(lam)) @ U.T
    Lam = Si @ B @ W_inv @ B.T @ Si
    Lam = 0.5 * (Lam + Lam.T)
    C = Si @ B @ W_isqrt
    lhs = B.T @ C @ C.T
    rhs = B.T @ Si
    r = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    return Lam, C, r


def _closed_Q(Lam, bank, grid):
    G = eval_G(bank, grid).values
    Q = _herm(G) @ Lam @ G
    return 0.5 * (Q + _herm(Q))


def solve_closed_form(Sigma, bank: FilterBank, grid: CircleGrid | None = None, prior=None,
                      refine_tol: float = 1e-9) -> SolveResult:
    """``Phi = (G* Lambda G)^{-1}``, optimal for every prior ``(G* Lambda0 G)^{-1}``.

    ``prior`` is only used to report the divergence.
    """
    grid = grid or CircleGrid(default_grid_size())
    Sigma = np.asarray(Sigma, dtype=float)
    Lam, C, stat = closed_form_multiplier(Sigma, bank)
    report = feasibility_check(Sigma, bank)
    if not report.feasible:
        raise Infeasible("Sigma is not in the range of the moment operator")
    Q = _closed_Q(Lam, bank, grid)
    try:
        L = pointwise_cholesky(Q, grid)
    except NotPositiveDefinite as exc:
        raise NotPositiveOnCircle(f"G* Lambda G loses rank at theta={exc.theta:.6g}") from None
    Phi = _density_from_Q(Q, grid, L)
    moments = apply_gamma(Phi, bank, grid)
    moment_res = float(np.linalg.norm(moments - Sigma) / np.linalg.norm(Sigma))

    fine = grid.refined()
    Q2 = _closed_Q(Lam, bank, fine)
    try:
        S2 = apply_gamma(_density_from_Q(Q2, fine), bank, fine)
        gap = relative_gap(moments, S2)
    except NotPositiveDefinite:
        gap = float("inf")
    divergence = None
    if prior is not None:
        prior_spec = _as_prior_spec(prior)
        Psi = realize_prior(prior_spec, grid)
        divergence = itakura_saito(Phi, Psi)
        div2 = itakura_saito(_density_from_Q(Q2, fine), realize_prior(prior_spec, fine))
        gap = max(gap, relative_gap(divergence, div2))
    if gap > refine_tol:
        raise GridTooCoarse(f"grid N={grid.size} too coarse: integrals change by {gap:.3g} "
                            f"relative on refinement (tolerance {refine_tol:g})", gap)
    return SolveResult(
        Phi=Phi, divergence=divergence, stationarity_residual=stat, moment_residual=moment_res,
        iterations=0, converged=moment_res <= 1e-8, method="closed", Lambda=Lam,
        refinement_gap=gap,
    )


def allpole_weight(Psi: SpectralDensity, bank: FilterBank, rtol: float = 1e-8) -> np.ndarray | None:
    """Find ``Lambda0`` with ``Psi = (G* Lambda0 G)^{-1}``, or ``None`` if no such fit.

    Used to decide whether the closed form applies to a given prior.
    """
    grid = Psi.grid
    target = np.linalg.inv(Psi.values)
    G = eval_G(bank, grid).values
    Gh = _herm(G)
    basis = symmetric_basis(bank.n)
    cols = []
    for E in basis:
        F = Gh @ E @ G
        cols.append(np.concatenate([F.real.ravel(), F.imag.ravel()]))
    M = np.column_stack(cols)
    rhs = np.concatenate([target.real.ravel(), target.imag.ravel()])
    coef, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = np.linalg.norm(M @ coef - rhs) / np.linalg.norm(rhs)
    if resid > rtol:
        return None
    return np.tensordot(coef, np.array(basis), axes=1)
