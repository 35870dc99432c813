"""Covariance matrices, symmetric eigendecomposition and spectral summaries.

Every bound in :mod:`covbound.bounds` depends on the covariance ``C`` only
through scale-free ratios of its ordered eigenvalues:

* intrinsic dimension ``r = tr(C) / lambda_1``
* tail ratios ``r_l = sum_{i >= l} lambda_i / lambda_1`` (with ``r_{d+1} = 0``)
* condition numbers ``kappa_l = lambda_1 / lambda_l``

Indices ``l`` are 1-based throughout the public API, matching the usual
eigenvalue notation; arrays are stored 0-based internally.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    DomainError,
    InvalidInputError,
    NotPSDError,
)

TOL_PSD = 1e-10
# lambda_l <= ZERO_EIG_RTOL * lambda_1 is treated as an exact zero
ZERO_EIG_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric positive semidefinite ``d x d`` matrix.

    The input is symmetrized as ``(m + m.T) / 2`` before validation, which
    absorbs formatting noise from text round trips.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvalidInputError(f"expected a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("matrix has non-finite entries")
        m = 0.5 * (m + m.T)
        w = np.linalg.eigvalsh(m)
        top = max(float(w[-1]), 0.0)
        if w[0] < -TOL_PSD * top or (top == 0.0 and w[0] < 0.0):
            raise NotPSDError(
                f"smallest eigenvalue {w[0]:.3e} below -{TOL_PSD:g} * lambda_1 ({top:.3e})"
            )
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, d: int) -> CovarianceMatrix:
        return cls(np.eye(d))

    @classmethod
    def diag(cls, values) -> CovarianceMatrix:
        return cls(np.diag(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigenvalues of ``C`` and the derived ratios used by the bounds.

    Build it with :func:`spectrum_of` or :meth:`Spectrum.from_eigenvalues`.
    """

    eigenvalues: tuple[float, ...]
    trace: float
    r: float
    r_tail: tuple[float, ...] = field(repr=False)
    kappa: tuple[float, ...] = field(repr=False)

    @classmethod
    def from_eigenvalues(cls, values) -> Spectrum:
        lam = np.asarray(values, dtype=float).ravel()
        if lam.size == 0:
            raise InvalidInputError("empty spectrum")
        if not np.all(np.isfinite(lam)):
            raise InvalidInputError("spectrum has non-finite values")
        lam = np.sort(lam)[::-1]
        top = float(lam[0])
        if top <= 0.0:
            raise DegenerateSpectrumError("lambda_1 = 0: intrinsic dimension is undefined")
        if lam[-1] < -TOL_PSD * top:
            raise NotPSDError(f"eigenvalue {lam[-1]:.3e} is negative beyond tolerance")
        lam = np.maximum(lam, 0.0)
        trace = float(lam.sum())
        # suffix sums give r_l; append r_{d+1} = 0
        tail = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]]) / top
        tail[0] = trace / top
        kappa = tuple(
            float(top / v) if v > ZERO_EIG_RTOL * top else math.inf for v in lam
        )
        return cls(
            eigenvalues=tuple(float(v) for v in lam),
            trace=trace,
            r=trace / top,
            r_tail=tuple(float(t) for t in tail),
            kappa=kappa,
        )

    @property
    def d(self) -> int:
        return len(self.eigenvalues)

    @property
    def top(self) -> float:
        return self.eigenvalues[0]

    def lam(self, ell: int) -> float:
        self._check_index(ell)
        return self.eigenvalues[ell - 1]

    def kappa_l(self, ell: int) -> float:
        self._check_index(ell)
        return self.kappa[ell - 1]

    def r_l(self, ell: int) -> float:
        """Tail ratio ``r_ell``, valid for ``1 <= ell <= d + 1``."""
        if not 1 <= ell <= self.d + 1:
            raise DomainError(f"tail index {ell} outside 1..{self.d + 1}")
        return self.r_tail[ell - 1]

    def _check_index(self, ell: int) -> None:
        if not 1 <= ell <= self.d:
            raise DomainError(f"eigenvalue index {ell} outside 1..{self.d}")


def _as_array(m) -> np.ndarray:
    if isinstance(m, CovarianceMatrix):
        return m.entries
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def eig_sym(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with ``vectors[:, i]`` the unit eigenvector
    for ``values[i]``. Accepts a :class:`CovarianceMatrix` or any symmetric
    array (differences such as ``S/n - C`` are not PSD).
    """
    a = _as_array(m)
    w, v = np.linalg.eigh(a)
    return w[::-1].copy(), v[:, ::-1].copy()


def spectrum_of(m) -> Spectrum:
    if not isinstance(m, CovarianceMatrix):
        m = CovarianceMatrix(m)
    values, _ = eig_sym(m)
    sp = Spectrum.from_eigenvalues(values)
    diag_trace = float(np.trace(m.entries))
    if abs(diag_trace - sp.trace) > 1e-9 * max(abs(diag_trace), sp.top):
        raise InvalidInputError("trace disagrees with eigenvalue sum; matrix is ill-conditioned")
    return sp


def cholesky_factor(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Semidefinite input, where LAPACK Cholesky fails, goes through the
    eigendecomposition square root ``V sqrt(max(lambda, 0))``, re-triangularized
    by a QR step so the result is still lower triangular.
    """
    if not isinstance(m, CovarianceMatrix):
        m = CovarianceMatrix(m)
    a = m.entries
    scale = max(1.0, float(np.linalg.norm(a)))
    try:
        L = np.linalg.cholesky(a)
        if np.linalg.norm(L @ L.T - a) <= 1e-8 * scale:
            return L
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(a)
    root = v * np.sqrt(np.maximum(w, 0.0))
    _, R = np.linalg.qr(root.T)
    L = R.T
    signs = np.where(np.diag(L) < 0, -1.0, 1.0)
    return L * signs


def random_psd(d: int, rng: np.random.Generator, rank: int | None = None) -> CovarianceMatrix:
    """Random PSD matrix ``A A^T / k`` with ``A`` Gaussian ``d x k``; ``k = rank or d``."""
    k = d if rank is None else rank
    if k < 0:
        raise DomainError("rank must be non-negative")
    A = rng.standard_normal((d, k))
    return CovarianceMatrix(A @ A.T / max(k, 1))


# -- file ingestion ---------------------------------------------------------


def _parse_json(obj) -> CovarianceMatrix | Spectrum:
    if isinstance(obj, dict) and "eigenvalues" in obj:
        return Spectrum.from_eigenvalues(obj["eigenvalues"])
    if isinstance(obj, dict) and "entries" in obj:
        entries = np.asarray(obj["entries"], dtype=float)
        if "d" in obj and entries.shape != (int(obj["d"]), int(obj["d"])):
            raise InvalidInputError(f"declared d={obj['d']} but entries have shape {entries.shape}")
        return CovarianceMatrix(entries)
    raise InvalidInputError('JSON input needs "entries" (with optional "d") or "eigenvalues"')


def parse_matrix_text(text: str) -> CovarianceMatrix | Spectrum:
    """Parse CSV rows or one of the two JSON layouts."""
    stripped = text.strip()
    if not stripped:
        raise InvalidInputError("empty input")
    if stripped[0] in "{[":
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"bad JSON: {exc}") from exc
        return _parse_json(obj)
    rows = [row for row in csv.reader(io.StringIO(stripped)) if any(c.strip() for c in row)]
    try:
        entries = [[float(c) for c in row] for row in rows]
    except ValueError as exc:
        raise InvalidInputError(f"bad CSV number: {exc}") from exc
    if any(len(row) != len(rows) for row in entries):
        raise InvalidInputError("CSV matrix must have d rows of d values")
    return CovarianceMatrix(np.array(entries))


def read_matrix_file(path: str | Path) -> CovarianceMatrix | Spectrum:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    return parse_matrix_text(text)
