"""Model, covariance and spectrum files.

Matrices travel as JSON and spectra as CSV with one row per grid node.
Floats in CSV are written with 17 significant digits; JSON uses Python's
shortest round-tripping ``repr``.  Both are lossless for 64-bit floats.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .filterbank import FilterBank
from .numerics import CircleGrid
from .spectra import SpectralDensity, spectral_density

NODE_ATOL = 1e-12


def _load_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _real_matrix(obj, what: str) -> np.ndarray:
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{what} must be a rectangular array of numbers") from None
    if M.ndim == 1 and what == "B":
        M = M[:, None]
    if M.ndim != 2:
        raise InputError(f"{what} must be two-dimensional, got shape {M.shape}")
    return M


def read_model(path) -> FilterBank:
    """``{"A": [[...]], "B": [[...]]}`` to a validated :class:`FilterBank`."""
    doc = _load_json(path)
    if not isinstance(doc, dict) or "A" not in doc or "B" not in doc:
        raise InputError(f"{path}: model file needs keys 'A' and 'B'")
    return FilterBank(_real_matrix(doc["A"], "A"), _real_matrix(doc["B"], "B"))


def write_model(path, bank: FilterBank) -> None:
    write_json(path, {"A": bank.A.tolist(), "B": bank.B.tolist()})


def read_sigma(path) -> np.ndarray:
    """Covariance as a bare nested list or under the key ``"Sigma"``."""
    doc = _load_json(path)
    if isinstance(doc, dict):
        if "Sigma" not in doc:
            raise InputError(f"{path}: expected a matrix or an object with key 'Sigma'")
        doc = doc["Sigma"]
    S = _real_matrix(doc, "Sigma")
    if S.shape[0] != S.shape[1]:
        raise InputError(f"{path}: Sigma must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InputError(f"{path}: Sigma has non-finite entries")
    return S


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def _header(m: int) -> list[str]:
    cols = ["theta"]
    for i in range(m):
        for j in range(i, m):
            cols += [f"re_{i + 1}{j + 1}", f"im_{i + 1}{j + 1}"]
    return cols


def write_spectrum(path, Phi: SpectralDensity) -> None:
    """Upper triangle of each sample, row-major, ``%.17g``."""
    m = Phi.m
    iu, ju = np.triu_indices(m)
    V = Phi.values[:, iu, ju]
    cols = [Phi.grid.nodes[:, None]]
    block = np.empty((V.shape[0], 2 * V.shape[1]))
    block[:, 0::2] = V.real
    block[:, 1::2] = V.imag
    cols.append(block)
    data = np.hstack(cols)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_header(m)) + "\n")
        for row in data:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def read_spectrum(path) -> SpectralDensity:
    """Parse a spectrum file; the nodes must be the standard grid of its length."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path}: empty spectrum file")
    header = [h.strip() for h in rows[0]]
    ncol = len(header) - 1
    m = int(round((np.sqrt(1 + 4 * ncol) - 1) / 2))
    if m < 1 or header != _header(m):
        raise InputError(f"{path}: header must be {','.join(_header(1))}... for an m x m spectrum")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError:
        raise InputError(f"{path}: non-numeric entry") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InputError(f"{path}: every row needs {len(header)} columns")
    grid = CircleGrid(data.shape[0])
    if np.max(np.abs(data[:, 0] - grid.nodes)) > NODE_ATOL:
        raise InputError(f"{path}: theta column is not the uniform grid on [-pi, pi) with {grid.size} nodes")
    vals = np.zeros((grid.size, m, m), dtype=complex)
    iu, ju = np.triu_indices(m)
    upper = data[:, 1::2] + 1j * data[:, 2::2]
    vals[:, iu, ju] = upper
    vals[:, ju, iu] = np.conj(upper)
    # diagonal entries are real by construction of the file
    idx = np.arange(m)
    vals[:, idx, idx] = vals[:, idx, idx].real
    return spectral_density(grid, vals)
