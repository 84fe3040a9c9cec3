"""Regularity and Kronecker index of the mode pencils ``D_k + lambda A``.

The spatial stencil diagonalizes, which splits the semi-discrete system into
``N`` pencils ``D_k + lambda A`` with ``D_k = -lambda_k B - C``. The index of
one pencil is read off from ``T = (c A + D_k)^{-1} A``: in Weierstrass form the
nilpotent part of ``T`` has the same block sizes as the nilpotent part of the
pencil, so the index is the first power at which ``rank(T^nu)`` stops dropping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .discretize import GridSpec, p_spectrum
from .problem import PdaeProblem

__all__ = [
    "PencilReport",
    "IndexReport",
    "IrregularPencil",
    "IndexNearTieWarning",
    "INDEX_RANK_TOL",
    "pencil_regular",
    "pencil_index",
    "mode_matrix",
    "select_modes",
    "differential_time_index",
]

INDEX_RANK_TOL = 1e-8


class IrregularPencil(ValueError):
    def __init__(self, msg: str, k: int | None = None):
        self.k = k
        super().__init__(msg)


class IndexNearTieWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PencilReport:
    k: int
    lambda_k: complex
    regular: bool
    index: int


@dataclass(frozen=True)
class IndexReport:
    per_mode: tuple
    nu_dt: int
    uniform: bool


def _scaled_det(M: np.ndarray) -> float:
    # |det| relative to Hadamard's bound, so the zero test is scale free
    rows = np.linalg.norm(M, axis=1)
    if np.any(rows == 0.0):
        return 0.0
    sign, logdet = np.linalg.slogdet(M)
    if sign == 0:
        return 0.0
    return float(np.exp(logdet - np.sum(np.log(rows))))


def pencil_regular(A, Dk, tol: float = 1e-12) -> bool:
    """Whether ``det(Dk + lambda A)`` is not identically zero in ``lambda``."""
    A = np.asarray(A)
    Dk = np.asarray(Dk)
    if A.shape != Dk.shape or A.shape[0] != A.shape[1]:
        raise linalg.DimensionMismatch("pencil matrices must be square and of equal size")
    n = A.shape[0]
    # a polynomial of degree <= n vanishing at n+1 distinct points is zero
    samples = np.arange(n + 1) + 1.0 / math.pi
    return any(_scaled_det(Dk + lam * A) > tol for lam in samples)


def _balance(A: np.ndarray, D: np.ndarray, sweeps: int = 30):
    """Power-of-two row/column scaling equilibrating ``|A| + |D|``.

    Strict equivalence by diagonal matrices leaves the Kronecker structure
    unchanged, and power-of-two factors keep the entries exact.
    """
    W = np.abs(A) + np.abs(D)
    n = W.shape[0]
    left = np.ones(n)
    right = np.ones(n)
    for _ in range(sweeps):
        rs = (left[:, None] * W * right[None, :]).sum(axis=1)
        left /= np.sqrt(np.where(rs > 0, rs, 1.0))
        cs = (left[:, None] * W * right[None, :]).sum(axis=0)
        right /= np.sqrt(np.where(cs > 0, cs, 1.0))
    left = 2.0 ** np.round(np.log2(left))
    right = 2.0 ** np.round(np.log2(right))
    return left[:, None] * A * right[None, :], left[:, None] * D * right[None, :]


SHIFTS = (0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0)


def _pick_shift(A: np.ndarray, D: np.ndarray, shifts=SHIFTS) -> np.ndarray:
    # best conditioned c A + D among a few small shifts
    best, best_q = None, 0.0
    for c in shifts:
        M = c * A + D
        sv = np.linalg.svd(M, compute_uv=False)
        q = sv[-1] / sv[0] if sv[0] > 0 else 0.0
        if q > best_q:
            best, best_q = M, q
    if best is None or best_q < 1e-13:
        raise IrregularPencil("no shift c found with c A + D_k regular")
    return best


def _warn_near_tie(sv: np.ndarray, tol: float) -> None:
    close = sv[(sv > tol / 100.0) & (sv < tol * 100.0)]
    if close.size:
        warnings.warn(
            f"rank decision near tolerance: singular value {close.min():.2e} vs tol {tol:.0e}",
            IndexNearTieWarning,
            stacklevel=3,
        )


def pencil_index(A, Dk, tol: float = INDEX_RANK_TOL, shifts=SHIFTS) -> int:
    """Kronecker index of the regular pencil ``Dk + lambda A``.

    Returns the first ``nu`` with ``ker T^nu = ker T^(nu+1)``, i.e.
    ``rank T^nu = rank T^(nu+1)``, for ``T = (c A + Dk)^{-1} A``. The kernels
    are grown one level at a time with orthonormal bases, so each rank
    decision is made on a matrix of norm one rather than on ``T^nu``, whose
    small nonzero eigenvalues would decay like their ``nu``-th power.
    """
    A = np.asarray(A)
    Dk = np.asarray(Dk)
    if not pencil_regular(A, Dk):
        raise IrregularPencil("pencil D_k + lambda A is singular")
    n = A.shape[0]
    Ab, Db = _balance(A, Dk)
    M = _pick_shift(Ab, Db, shifts)
    T = np.linalg.solve(M, Ab.astype(np.result_type(M, Ab)))
    norm = np.linalg.norm(T, 2)
    if norm == 0.0:
        return 1  # A = 0: purely algebraic
    T = T / norm
    eye = np.eye(n, dtype=T.dtype)
    K = np.zeros((n, 0), dtype=T.dtype)
    for nu in range(n + 1):
        # ker T^(nu+1) = {x : T x in ker T^nu}
        _, sv, vh = np.linalg.svd((eye - K @ K.conj().T) @ T)
        _warn_near_tie(sv, tol)
        nullity = int(np.count_nonzero(sv <= tol))
        if nullity == K.shape[1]:
            return nu
        K = vh[n - nullity :].conj().T
    return n


def mode_matrix(problem: PdaeProblem, lam: complex) -> np.ndarray:
    """``D_k = -lambda_k B - C`` for one eigenvalue of the stencil."""
    lam = complex(lam)
    if lam.imag == 0.0:
        return -lam.real * problem.B - problem.C
    return -lam * problem.B - problem.C


def select_modes(N: int, full: bool = False) -> list[int]:
    """Mode numbers to analyze: all of them, or a fixed spread-out subset.

    The subset holds the first, middle and last modes plus five interior ones
    placed by the golden-ratio sequence, so repeated runs always agree.
    """
    if full or N <= 8:
        return list(range(1, N + 1))
    chosen = {1, math.ceil(N / 2), N}
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    i = 1
    while len(chosen) < 8:
        chosen.add(1 + int(((i * golden) % 1.0) * N) % N)
        i += 1
    return sorted(chosen)


def differential_time_index(
    problem: PdaeProblem, grid: GridSpec, full: bool = False, tol: float = INDEX_RANK_TOL
) -> IndexReport:
    """Index of every analyzed mode pencil and their maximum ``nu_dt``."""
    lam = p_spectrum(grid.N, grid.h, problem.r, grid.delta)
    reports = []
    for k in select_modes(grid.N, full):
        lk = complex(lam[k - 1])
        Dk = mode_matrix(problem, lk)
        if not pencil_regular(problem.A, Dk):
            raise IrregularPencil(f"pencil of mode k={k} (lambda={lk:.6g}) is singular", k=k)
        reports.append(PencilReport(k=k, lambda_k=lk, regular=True, index=pencil_index(problem.A, Dk, tol)))
    indices = {r.index for r in reports}
    return IndexReport(per_mode=tuple(reports), nu_dt=max(indices), uniform=len(indices) == 1)
