"""Spectral densities, priors and the Itakura-Saito divergence."""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotCoercive, NotPositiveDefinite, SingularDensity
from .filterbank import FilterBank, eval_G
from .numerics import PIVOT_FLOOR, CircleGrid, GridFunction, circle_mean, logdet_mean, pointwise_cholesky

COERCIVITY_RTOL = 1e-8
PSD_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Hermitian PSD matrix function on the grid.

    ``coercivity`` is the smallest eigenvalue over all nodes and
    ``peak`` the largest.
    """

    samples: GridFunction = field(repr=False)
    coercivity: float
    peak: float

    @property
    def grid(self) -> CircleGrid:
        return self.samples.grid

    @property
    def values(self) -> np.ndarray:
        return self.samples.values

    @property
    def m(self) -> int:
        return self.samples.values.shape[1]

    @property
    def is_coercive(self) -> bool:
        return self.coercivity >= COERCIVITY_RTOL * self.peak and self.peak > 0


def spectral_density(grid: CircleGrid, values) -> SpectralDensity:
    """Wrap samples as a density, checking pointwise positive semidefiniteness."""
    f = GridFunction.hermitian(grid, values)
    eig = np.linalg.eigvalsh(f.values)
    lo, hi = float(eig.min()), float(eig.max())
    if lo < -PSD_ATOL * max(1.0, abs(hi)):
        node = int(np.argmin(eig.min(axis=1)))
        raise InputError(f"density is not positive semidefinite at node {node} (min eig {lo:.3g})")
    return SpectralDensity(samples=f, coercivity=lo, peak=hi)


# -- priors -----------------------------------------------------------------

@dataclass(frozen=True)
class ConstantPrior:
    c: float
    m: int = 1


@dataclass(frozen=True, eq=False)
class AllPolePrior:
    """``Psi = (G* Lambda0 G)^{-1}``."""

    Lambda0: np.ndarray
    bank: FilterBank


@dataclass(frozen=True)
class MovingAveragePrior:
    coefficients: tuple


@dataclass(frozen=True, eq=False)
class SampledPrior:
    """Prior known only by samples; resampled by trigonometric interpolation."""

    grid: CircleGrid
    values: np.ndarray


@dataclass(frozen=True)
class ExpressionPrior:
    """Scalar prior given as an arithmetic expression in ``theta``."""

    expr: str


PriorSpec = ConstantPrior | AllPolePrior | MovingAveragePrior | SampledPrior | ExpressionPrior


def ma_values(coefficients, grid: CircleGrid) -> np.ndarray:
    """``|w(e^{i theta})|^2`` for ``w(z) = sum_k w_k z^{-k}``, shape ``(N,)``."""
    w = np.asarray(coefficients, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InputError("moving-average coefficients must be a nonempty list")
    k = np.arange(w.size)
    W = np.exp(-1j * np.outer(grid.nodes, k)) @ w
    return np.abs(W) ** 2


def ma_spectrum(coefficients, grid: CircleGrid) -> SpectralDensity:
    """Moving-average density; unit-circle zeros are allowed here."""
    return spectral_density(grid, ma_values(coefficients, grid))


def _resample(values: np.ndarray, size: int) -> np.ndarray:
    """Trigonometric interpolation of samples on ``[-pi, pi)`` onto a new uniform grid."""
    N = values.shape[0]
    if N == size:
        return values
    if size > N:
        # nodes start at -pi, so coefficients pick up a (-1)^k phase
        k = np.fft.fftfreq(N, d=1.0 / N)
        coef = np.fft.fft(values, axis=0) * np.exp(-1j * np.pi * k)[:, None, None] / N
        out = np.zeros((size,) + values.shape[1:], dtype=complex)
        half = N // 2
        out[:half] = coef[:half]
        out[-half + 1:] = coef[-half + 1:]
        # split the Nyquist term to keep the interpolant real for real data
        out[half] = 0.5 * coef[half]
        out[-half] = 0.5 * coef[half]
    else:
        if N % size:
            raise InputError(f"cannot resample {N} samples onto {size} nodes")
        # coarser grid nodes are a subset of the finer ones
        return values[:: N // size]
    kk = np.fft.fftfreq(size, d=1.0 / size)
    return np.fft.ifft(out * np.exp(1j * np.pi * kk)[:, None, None] * size, axis=0)


def _prior_values(spec, grid: CircleGrid) -> np.ndarray:
    if isinstance(spec, ConstantPrior):
        if not np.isfinite(spec.c):
            raise InputError("constant prior must be finite")
        return np.broadcast_to(spec.c * np.eye(spec.m), (grid.size, spec.m, spec.m)).copy()
    if isinstance(spec, AllPolePrior):
        G = eval_G(spec.bank, grid).values
        L0 = np.asarray(spec.Lambda0, dtype=float)
        Q = np.conj(np.swapaxes(G, -1, -2)) @ L0 @ G
        Q = 0.5 * (Q + np.conj(np.swapaxes(Q, -1, -2)))
        try:
            L = pointwise_cholesky(Q, grid)
        except NotPositiveDefinite as exc:
            raise NotCoercive(f"G* Lambda0 G is singular at theta={exc.theta:.6g}") from None
        Linv = np.linalg.solve(L, np.broadcast_to(np.eye(Q.shape[-1]), Q.shape))
        return np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    if isinstance(spec, MovingAveragePrior):
        return ma_values(spec.coefficients, grid)[:, None, None]
    if isinstance(spec, SampledPrior):
        v = np.asarray(spec.values)
        if v.ndim == 1:
            v = v[:, None, None]
        return _resample(v.astype(complex), grid.size)
    if isinstance(spec, ExpressionPrior):
        vals = eval_theta_expression(spec.expr, grid.nodes)
        return np.asarray(vals, dtype=float)[:, None, None]
    raise InputError(f"unknown prior specification {spec!r}")


def realize_prior(spec, grid: CircleGrid) -> SpectralDensity:
    """Sample a prior on ``grid`` and require coercivity."""
    dens = spectral_density(grid, _prior_values(spec, grid))
    if not dens.is_coercive:
        raise NotCoercive(f"prior is not coercive: min eigenvalue {dens.coercivity:.3g}, "
                          f"max {dens.peak:.3g}")
    return dens


# -- divergence and lags ----------------------------------------------------

def itakura_saito(Phi: SpectralDensity, Psi: SpectralDensity) -> float:
    """``1/2 int tr(Phi Psi^{-1} - log(Phi Psi^{-1}) - I)``."""
    if Phi.grid != Psi.grid or Phi.m != Psi.m:
        raise InputError("densities live on different grids or have different sizes")
    if not Psi.is_coercive:
        raise NotCoercive("prior density is not coercive")
    if Phi.coercivity <= PIVOT_FLOOR * Phi.peak:
        node = int(np.argmin(np.linalg.eigvalsh(Phi.values)[:, 0]))
        raise SingularDensity(f"Phi is singular at theta={Phi.grid.nodes[node]:.6g}")
    try:
        ld_phi = logdet_mean(Phi.samples)
    except NotPositiveDefinite as exc:
        raise SingularDensity(f"Phi is singular at theta={exc.theta:.6g}") from None
    LPsi = pointwise_cholesky(Psi.values, Psi.grid)
    ld_psi = logdet_mean(Psi.samples)
    # tr(Phi Psi^{-1}) = tr(L^{-1} Phi L^{-*}) with Psi = L L*
    T = np.linalg.solve(LPsi, Phi.values)
    T = np.linalg.solve(LPsi, np.conj(np.swapaxes(T, -1, -2)))
    tr = np.trace(T, axis1=-2, axis2=-1).real
    return float(0.5 * circle_mean(tr) - 0.5 * (ld_phi - ld_psi) - 0.5 * Phi.m)


def spectrum_to_lags(Phi: SpectralDensity, count: int) -> np.ndarray:
    """``c_j = int e^{i j theta} Phi(theta)`` for ``j = 0..count-1`` (scalar densities)."""
    if Phi.m != 1:
        raise InputError("lags are defined for scalar densities only")
    if count < 1:
        raise InputError("count must be positive")
    theta = Phi.grid.nodes
    phi = Phi.values[:, 0, 0]
    E = np.exp(1j * np.outer(theta, np.arange(count))) * phi[:, None]
    c = circle_mean(E)
    scale = circle_mean(np.abs(phi)).real
    if np.max(np.abs(c.imag)) > 1e-10 * max(scale, 1.0):
        raise InputError("density is not conjugate symmetric; lags are complex")
    return c.real


# -- expressions ------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"cos": np.cos, "sin": np.sin, "exp": np.exp, "abs": np.abs, "sqrt": np.sqrt}
_CONSTS = {"pi": math.pi, "e": math.e}


def eval_theta_expression(expr: str, theta: np.ndarray) -> np.ndarray:
    """Evaluate an arithmetic expression in ``theta`` (``^`` means power).

    Only numbers, ``theta``, ``pi``, ``e``, the operators ``+ - * / ^ **``
    and the functions cos, sin, exp, abs, sqrt are accepted.
    """
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InputError(f"cannot parse expression {expr!r}: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "theta":
                return theta
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise InputError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise InputError(f"unsupported construct in expression {expr!r}")

    out = np.broadcast_to(np.asarray(ev(tree), dtype=float), theta.shape).copy()
    if not np.all(np.isfinite(out)):
        raise InputError(f"expression {expr!r} is not finite on the grid")
    return out
