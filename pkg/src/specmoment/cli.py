"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 not converged,
5 grid too coarse.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import (
    GridTooCoarse,
    Infeasible,
    InputError,
    NotConverged,
    NotPositiveDefinite,
    NotPositiveOnCircle,
    SpecMomentError,
)
from .filterbank import FilterBank, toeplitz_bank
from .io import dumps_json, read_model, read_sigma, read_spectrum, write_json, write_spectrum
from .momentspace import apply_gamma, feasibility_check
from .numerics import CircleGrid, default_grid_size
from .oracle import levinson
from .solvers import NewtonConfig, allpole_weight, solve_closed_form, solve_newton
from .spectra import (
    AllPolePrior,
    ConstantPrior,
    ExpressionPrior,
    MovingAveragePrior,
    SampledPrior,
    itakura_saito,
    ma_spectrum,
    realize_prior,
    spectral_density,
    spectrum_to_lags,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_GRID = 5

SEC5_LAGS = (20.0, 15.0, 6.0, 1.0, 0.0, 0.0, 0.0, 0.0)
SEC5_MA = (1.0, 3.0, 3.0, 1.0)
SEC5_PRIOR_DEFAULT = "10*(1+0.9*cos(theta)*(1+0.9*cos(theta))^2)"
SEC5_PRIOR_NOTE = (
    "default prior reads the printed formula literally, with the outer "
    "parenthesis closing after the square; pass --prior-expr to choose "
    "another grouping, e.g. 10*(1+0.9*cos(theta))*(1+0.9*cos(theta))^2"
)

log = logging.getLogger("specmoment")


def parse_prior(spec: str, bank: FilterBank | None = None, m: int = 1):
    """Turn ``kind:value`` into a prior specification.

    ``constant:<c>``, ``allpole:identity``, ``ma:<c0,c1,...>``,
    ``file:<path>`` or ``expr:<expression in theta>``.
    """
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise InputError(f"prior {spec!r} must look like kind:value")
    kind = kind.strip().lower()
    if kind == "constant":
        try:
            c = float(arg)
        except ValueError:
            raise InputError(f"constant prior needs a number, got {arg!r}") from None
        return ConstantPrior(c, m)
    if kind == "allpole":
        if arg.strip().lower() != "identity":
            raise InputError("only allpole:identity is supported")
        if bank is None:
            raise InputError("allpole prior needs --model")
        return AllPolePrior(np.eye(bank.n), bank)
    if kind == "ma":
        try:
            coef = tuple(float(c) for c in arg.split(","))
        except ValueError:
            raise InputError(f"ma prior needs comma-separated numbers, got {arg!r}") from None
        return MovingAveragePrior(coef)
    if kind == "file":
        dens = read_spectrum(arg)
        return SampledPrior(dens.grid, np.array(dens.values))
    if kind == "expr":
        return ExpressionPrior(arg)
    raise InputError(f"unknown prior kind {kind!r}")


def _grid(args) -> CircleGrid:
    return CircleGrid(args.grid if getattr(args, "grid", None) else default_grid_size())


def _emit(obj) -> None:
    sys.stdout.write(dumps_json(obj))


# -- commands ---------------------------------------------------------------

def cmd_feasibility(args) -> int:
    bank = read_model(args.model)
    Sigma = read_sigma(args.sigma)
    report = feasibility_check(Sigma, bank, args.tol)
    _emit(report.to_dict())
    return EXIT_OK if report.strictly else EXIT_INFEASIBLE


def _closed_prior_ok(prior, bank, grid) -> None:
    if isinstance(prior, AllPolePrior):
        return
    Psi = realize_prior(prior, grid)
    if Psi.m != bank.m or allpole_weight(Psi, bank) is None:
        raise InputError("--method closed needs a prior of the form (G* Lambda0 G)^{-1} for this model")


def cmd_solve(args) -> int:
    bank = read_model(args.model)
    Sigma = read_sigma(args.sigma)
    prior = parse_prior(args.prior, bank, bank.m)
    grid = _grid(args)
    result = None
    code = EXIT_OK
    if args.method == "closed":
        _closed_prior_ok(prior, bank, grid)
        try:
            result = solve_closed_form(Sigma, bank, grid, prior=prior)
        except NotPositiveOnCircle as exc:
            raise NotConverged(str(exc)) from None
        if not result.converged:
            code = EXIT_NOT_CONVERGED
    else:
        try:
            result = solve_newton(Sigma, prior, bank, NewtonConfig(grid_size=grid.size))
        except NotConverged as exc:
            if exc.result is None:
                raise
            result = exc.result
            log.error("%s", exc)
            code = EXIT_NOT_CONVERGED
    if args.out:
        write_spectrum(args.out, result.Phi)
    report = result.report()
    if args.report:
        write_json(args.report, report)
    else:
        _emit(report)
    return code


def cmd_moments(args) -> int:
    bank = read_model(args.model)
    Phi = read_spectrum(args.spectrum)
    if Phi.m != bank.m:
        raise InputError(f"spectrum is {Phi.m}x{Phi.m} but the model has m={bank.m}")
    Sigma = apply_gamma(Phi, bank, Phi.grid)
    out = {"Sigma": Sigma.tolist()}
    if Phi.m == 1:
        out["lags"] = spectrum_to_lags(Phi, args.count or bank.n).tolist()
    _emit(out)
    return EXIT_OK


def cmd_divergence(args) -> int:
    Phi = read_spectrum(args.spectrum)
    bank = read_model(args.model) if args.model else None
    prior = parse_prior(args.prior, bank, Phi.m)
    Psi = realize_prior(prior, Phi.grid)
    _emit({"divergence": itakura_saito(Phi, Psi)})
    return EXIT_OK


def cmd_compare(args) -> int:
    a = read_spectrum(args.first)
    b = read_spectrum(args.second)
    if a.grid != b.grid or a.m != b.m:
        raise InputError("spectra have different grids or sizes")
    diff = np.linalg.norm(a.values - b.values, axis=(1, 2))
    ref = np.linalg.norm(b.values, axis=(1, 2))
    _emit({"max_relative_difference": float(np.max(diff / np.maximum(ref, np.finfo(float).tiny)))})
    return EXIT_OK


def sec5_problem(grid: CircleGrid):
    """Bank, true spectrum and covariance of the eight-lag moving-average example."""
    bank = toeplitz_bank(len(SEC5_LAGS))
    true = ma_spectrum(SEC5_MA, grid)
    Sigma = apply_gamma(true, bank, grid)
    return bank, true, Sigma


def cmd_example_sec5(args) -> int:
    grid = _grid(args)
    # the true spectrum vanishes at theta = -pi, so no divergence is reported for it
    bank, true, Sigma = sec5_problem(grid)
    expr = args.prior_expr or SEC5_PRIOR_DEFAULT
    prior = ExpressionPrior(expr)
    Psi = realize_prior(prior, grid)
    opt = solve_newton(Sigma, prior, bank, NewtonConfig(grid_size=grid.size))
    me = solve_closed_form(Sigma, bank, grid, prior=ConstantPrior(1.0))
    ar = levinson(SEC5_LAGS)
    ar_phi = spectral_density(grid, ar.spectrum(grid))
    target = np.array(SEC5_LAGS)
    summary = {
        "grid_size": grid.size,
        "lags": list(SEC5_LAGS),
        "prior_expr": expr,
        "prior_is_default": args.prior_expr is None,
        "prior_note": SEC5_PRIOR_NOTE,
        "optimal": {
            "divergence_to_prior": opt.divergence,
            "iterations": opt.iterations,
            "lag_residual": float(np.max(np.abs(spectrum_to_lags(opt.Phi, 8) - target))),
            "moment_residual": opt.moment_residual,
        },
        "maximum_entropy": {
            "divergence_to_prior": itakura_saito(me.Phi, Psi),
            "lag_residual": float(np.max(np.abs(spectrum_to_lags(me.Phi, 8) - target))),
            "levinson_max_relative_difference": float(
                np.max(np.abs(me.Phi.values - ar_phi.values) / np.abs(ar_phi.values))),
            "moment_residual": me.moment_residual,
        },
    }
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_spectrum(out / "true.csv", true)
        write_spectrum(out / "prior.csv", Psi)
        write_spectrum(out / "optimal.csv", opt.Phi)
        write_spectrum(out / "me.csv", me.Phi)
        write_json(out / "summary.json", summary)
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror}") from None
    _emit(summary)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _pow2(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if n < 4 or n & (n - 1):
        raise argparse.ArgumentTypeError(f"{n} is not a power of two >= 4")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specmoment",
                                description="Spectral estimation from filter-bank state covariances.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("feasibility", help="check whether Sigma is a valid state covariance")
    s.add_argument("--model", required=True)
    s.add_argument("--sigma", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_feasibility)

    s = sub.add_parser("solve", help="closest density to a prior matching Sigma")
    s.add_argument("--model", required=True)
    s.add_argument("--sigma", required=True)
    s.add_argument("--prior", required=True,
                   help="constant:<c> | allpole:identity | ma:<c0,c1,...> | file:<path> | expr:<expr>")
    s.add_argument("--method", choices=("newton", "closed"), default="newton")
    s.add_argument("--grid", type=_pow2)
    s.add_argument("--out", help="spectrum CSV for the solution")
    s.add_argument("--report", help="JSON report path (default: standard output)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("moments", help="state covariance (and lags) of a spectrum")
    s.add_argument("--model", required=True)
    s.add_argument("--spectrum", required=True)
    s.add_argument("--count", type=int, help="number of lags (default n)")
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("divergence", help="Itakura-Saito divergence of a spectrum from a prior")
    s.add_argument("--spectrum", required=True)
    s.add_argument("--prior", required=True)
    s.add_argument("--model", help="needed for allpole priors")
    s.set_defaults(func=cmd_divergence)

    s = sub.add_parser("compare", help="max pointwise relative difference of two spectra")
    s.add_argument("first")
    s.add_argument("second")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("example-sec5", help="eight-lag moving-average example")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--prior-expr", help=f"prior in theta (default {SEC5_PRIOR_DEFAULT})")
    s.add_argument("--grid", type=_pow2)
    s.set_defaults(func=cmd_example_sec5)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except GridTooCoarse as exc:
        print(f"grid too coarse: {exc}", file=sys.stderr)
        return EXIT_GRID
    except (InputError, NotPositiveDefinite, SpecMomentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
