"""Dense and banded linear algebra used by the discretization and integrators.

Matrices are plain :class:`numpy.ndarray` objects. Dense LU goes through
LAPACK ``getrf``/``getrs`` and banded LU through ``gbtrf``/``gbtrs``; the
wrappers add the singularity test and the dimension checks the rest of the
package relies on. Elimination-based numerical rank is implemented here
directly because the index analysis needs access to the pivot magnitudes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

__all__ = [
    "LinAlgError",
    "SingularMatrix",
    "DimensionMismatch",
    "LuFactors",
    "BandedLuFactors",
    "lu_factor",
    "lu_solve",
    "banded_lu_factor",
    "banded_lu_solve",
    "kron",
    "numerical_rank",
    "echelon_pivots",
    "SINGULAR_TOL",
    "RANK_TOL",
]

SINGULAR_TOL = 1e-12
RANK_TOL = 1e-10


class LinAlgError(ValueError):
    """Base class for linear algebra failures in this package."""


class SingularMatrix(LinAlgError):
    pass


class DimensionMismatch(LinAlgError):
    pass


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.inexact):
        a = a.astype(float)
    return a


@dataclass(frozen=True)
class LuFactors:
    """Row-pivoted LU factors ``P m = L U`` in combined storage.

    ``lu`` holds the unit lower factor below the diagonal and ``U`` on and
    above it. ``perm`` lists for each row of ``P m`` the row of ``m`` it came
    from, and ``sign`` is the parity of that permutation.
    """

    lu: np.ndarray
    piv: np.ndarray
    perm: np.ndarray
    sign: int

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return np.tril(self.lu, -1) + np.eye(self.n, dtype=self.lu.dtype)

    @property
    def upper(self) -> np.ndarray:
        return np.triu(self.lu)

    def determinant(self):
        return self.sign * np.prod(np.diag(self.lu))


def _perm_from_ipiv(ipiv: np.ndarray) -> tuple[np.ndarray, int]:
    n = len(ipiv)
    perm = np.arange(n)
    sign = 1
    for i, p in enumerate(ipiv):
        if p != i:
            perm[[i, p]] = perm[[p, i]]
            sign = -sign
    return perm, sign


def lu_factor(m, tol: float = SINGULAR_TOL) -> LuFactors:
    """Factor a square matrix with partial pivoting.

    Raises
    ------
    SingularMatrix
        If some pivot is below ``tol`` times the largest absolute row sum.
    """
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"lu_factor needs a square matrix, got {a.shape}")
    n = a.shape[0]
    scale = np.abs(a).sum(axis=1).max() if n else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    diag = np.abs(np.diag(lu))
    if n and (scale == 0.0 or diag.min() <= tol * scale):
        k = int(np.argmin(diag))
        raise SingularMatrix(f"pivot {k} is {diag[k]:.3e} (scale {scale:.3e})")
    perm, sign = _perm_from_ipiv(piv)
    return LuFactors(lu=lu, piv=piv, perm=perm, sign=sign)


def lu_solve(f: LuFactors, rhs) -> np.ndarray:
    """Solve ``m x = rhs`` with factors from :func:`lu_factor`.

    ``rhs`` may be a vector or a matrix whose columns are right-hand sides.
    """
    b = np.asarray(rhs)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factors have {f.n}")
    if np.iscomplexobj(b) and not np.iscomplexobj(f.lu):
        return lu_solve(f, b.real) + 1j * lu_solve(f, b.imag)
    return sla.lu_solve((f.lu, f.piv), b, check_finite=False)


@dataclass(frozen=True)
class BandedLuFactors:
    """LU factors of a band matrix in LAPACK ``gbtrf`` storage."""

    ab: np.ndarray
    ipiv: np.ndarray
    kl: int
    ku: int

    @property
    def n(self) -> int:
        return self.ab.shape[1]


def _gb_routines(dtype):
    kind = "z" if np.issubdtype(dtype, np.complexfloating) else "d"
    return getattr(lapack, kind + "gbtrf"), getattr(lapack, kind + "gbtrs")


def banded_lu_factor(bands, kl: int, ku: int, tol: float = SINGULAR_TOL) -> BandedLuFactors:
    """Factor a band matrix given in :func:`scipy.linalg.solve_banded` layout.

    ``bands[ku + i - j, j] == a[i, j]`` for ``-kl <= j - i <= ku``; the array
    has ``kl + ku + 1`` rows.
    """
    bands = np.asarray(bands)
    if bands.ndim != 2 or bands.shape[0] != kl + ku + 1:
        raise DimensionMismatch(f"band storage must have {kl + ku + 1} rows, got {bands.shape}")
    dtype = np.complex128 if np.iscomplexobj(bands) else np.float64
    n = bands.shape[1]
    ab = np.zeros((2 * kl + ku + 1, n), dtype=dtype, order="F")
    ab[kl:, :] = bands
    scale = 0.0
    if n:
        # row i of the matrix lives on the anti-diagonal ku + i - j of bands
        rows = np.zeros(n)
        for r in range(kl + ku + 1):
            j = np.arange(n)
            i = j + r - ku
            ok = (i >= 0) & (i < n)
            np.add.at(rows, i[ok], np.abs(bands[r, j[ok]]))
        scale = rows.max()
    gbtrf, _ = _gb_routines(dtype)
    lu, ipiv, info = gbtrf(ab, kl, ku, overwrite_ab=1)
    if info < 0:
        raise LinAlgError(f"gbtrf: illegal argument {-info}")
    udiag = np.abs(lu[kl + ku, :])
    if n and (info > 0 or scale == 0.0 or udiag.min() <= tol * scale):
        k = int(np.argmin(udiag))
        raise SingularMatrix(f"banded pivot {k} is {udiag[k]:.3e} (scale {scale:.3e})")
    return BandedLuFactors(ab=lu, ipiv=ipiv, kl=kl, ku=ku)


def banded_lu_solve(f: BandedLuFactors, rhs) -> np.ndarray:
    b = np.asarray(rhs)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factors have {f.n}")
    if np.iscomplexobj(b) and not np.iscomplexobj(f.ab):
        return banded_lu_solve(f, b.real) + 1j * banded_lu_solve(f, b.imag)
    vec = b.ndim == 1
    b2 = b.reshape(f.n, -1).astype(f.ab.dtype, copy=True)
    _, gbtrs = _gb_routines(f.ab.dtype)
    x, info = gbtrs(f.ab, f.kl, f.ku, b2, f.ipiv, overwrite_b=1)
    if info != 0:
        raise LinAlgError(f"gbtrs failed with info={info}")
    return x.ravel() if vec else x


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def echelon_pivots(m) -> np.ndarray:
    """Pivot magnitudes of Gaussian elimination with complete pivoting.

    The returned sequence is non-increasing in practice and has one entry per
    elimination step performed (``min(rows, cols)`` at most); elimination stops
    early once the remaining block is exactly zero.
    """
    a = np.array(m, dtype=complex)
    rows, cols = a.shape
    piv = []
    for k in range(min(rows, cols)):
        sub = np.abs(a[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        p = sub[i, j]
        if p == 0.0:
            break
        piv.append(p)
        i += k
        j += k
        a[[k, i], :] = a[[i, k], :]
        a[:, [k, j]] = a[:, [j, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(factors, a[k, k:])
    return np.array(piv)


def numerical_rank(m, tol: float = RANK_TOL, scale: float | None = None) -> int:
    """Rank by row-echelon reduction with complete pivoting.

    A pivot counts when it exceeds ``tol`` times ``scale``, which defaults to
    the largest absolute entry of ``m``. Pass an explicit scale when ``m`` may
    be a rounding-level matrix that should count as zero.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = np.asarray(m)
    if a.size == 0:
        return 0
    top = np.abs(a).max() if scale is None else scale
    if top == 0.0:
        return 0
    rank = 0
    for p in echelon_pivots(a):
        if p <= tol * top:
            break
        rank += 1
    return rank
