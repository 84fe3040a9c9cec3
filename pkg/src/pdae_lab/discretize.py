"""Method-of-lines finite differences: ``M U' = D U + F(t)``.

Unknowns are ordered point by point, ``U = (u_1, ..., u_N)`` with each
``u_i`` of length ``n``, so ``M = I_N (x) A`` and
``D = -(1/h^2) P (x) B - I_N (x) C`` with the tridiagonal stencil ``P``.
The second derivative always uses central differences; the first
derivative is weighted by ``delta`` (``delta = 1/2`` is central, every other
value gives a first order one-sided mix).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatch
from .problem import PdaeProblem, eval_on_points, exact_on_grid

__all__ = [
    "GridSpec",
    "MolSystem",
    "MolForcing",
    "DegenerateStencil",
    "stencil_coefficients",
    "build_p",
    "p_spectrum",
    "assemble",
    "truncation_error",
]


class DegenerateStencil(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``N`` interior points and spacing ``h``."""

    N: int
    h: float
    delta: float = 0.5

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one interior grid point")
        if not self.h > 0:
            raise ValueError("grid size must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")

    @classmethod
    def for_problem(cls, problem: PdaeProblem, N: int, delta: float = 0.5) -> "GridSpec":
        return cls(N=N, h=problem.length / (N + 1), delta=delta)

    @classmethod
    def from_h(cls, problem: PdaeProblem, h: float, delta: float = 0.5) -> "GridSpec":
        """Grid for a requested spacing; ``length / h`` must be an integer."""
        cells = problem.length / h
        k = round(cells)
        if k < 2 or abs(cells - k) > 1e-9 * max(1.0, cells):
            raise ValueError(f"h={h} does not divide the domain length {problem.length}")
        return cls.for_problem(problem, k - 1, delta)

    def points(self, x_lo: float) -> np.ndarray:
        return x_lo + self.h * np.arange(1, self.N + 1)


def stencil_coefficients(h: float, r: float, delta: float) -> tuple[float, float, float]:
    """(sub, diag, super) entries of ``P`` for the weighted stencil."""
    sub = 1.0 + h * r * (delta - 1.0)
    diag = -(2.0 - h * r * (1.0 - 2.0 * delta))
    sup = 1.0 + h * r * delta
    return sub, diag, sup


def build_p(N: int, h: float, r: float, delta: float) -> np.ndarray:
    """Toeplitz tridiagonal matrix ``P`` with ``(P U)_i ~ h^2 (u_xx + r u_x)(x_i)``."""
    if N < 1 or not h > 0:
        raise ValueError("need N >= 1 and h > 0")
    sub, diag, sup = stencil_coefficients(h, r, delta)
    return (
        np.diag(np.full(N, diag))
        + np.diag(np.full(N - 1, sup), 1)
        + np.diag(np.full(N - 1, sub), -1)
    )


def p_spectrum(N: int, h: float, r: float, delta: float) -> np.ndarray:
    """Closed-form eigenvalues of ``P / h^2``, ordered by mode ``j = 1..N``."""
    sub, diag, sup = stencil_coefficients(h, r, delta)
    if sup == 0.0 or sub == 0.0:
        raise DegenerateStencil(f"stencil with h={h}, r={r}, delta={delta} is not diagonalizable")
    root = np.sqrt(complex(sub / sup))
    j = np.arange(1, N + 1)
    return diag / h**2 + 2.0 * (sup / h**2) * root * np.cos(j * np.pi / (N + 1))


class MolForcing:
    """``F(t)``: source samples plus the Dirichlet data moved to the right-hand side."""

    def __init__(self, problem: PdaeProblem, grid: GridSpec):
        self.problem = problem
        self.grid = grid
        self.x = grid.points(problem.x_lo)
        sub, _, sup = stencil_coefficients(grid.h, problem.r, grid.delta)
        self._w_lo = sub / grid.h**2
        self._w_hi = sup / grid.h**2

    def blocks(self, t: float) -> np.ndarray:
        p = self.problem
        F = eval_on_points(p.forcing, t, self.x, p.n)
        B = p.B
        F[0] -= self._w_lo * (B @ np.asarray(p.dirichlet_lo(t), dtype=float))
        F[-1] -= self._w_hi * (B @ np.asarray(p.dirichlet_hi(t), dtype=float))
        return F

    def __call__(self, t: float) -> np.ndarray:
        return self.blocks(t).ravel()


@dataclass(frozen=True)
class MolSystem:
    dim: int
    mass: np.ndarray
    stiffness: np.ndarray
    forcing: MolForcing
    grid: GridSpec
    problem: PdaeProblem
    p_x: int

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def n(self) -> int:
        return self.problem.n

    def block(self, which: str, i: int, j: int) -> np.ndarray:
        mat = self.mass if which == "mass" else self.stiffness
        n = self.n
        return mat[i * n : (i + 1) * n, j * n : (j + 1) * n]

    def stiffness_bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Block diagonals of ``D``: lower ``(N-1, n, n)``, diagonal ``(N, n, n)``, upper."""
        N, n = self.N, self.n
        Dr = self.stiffness.reshape(N, n, N, n)
        idx = np.arange(N)
        diag = Dr[idx, :, idx, :]
        lower = Dr[idx[1:], :, idx[:-1], :]
        upper = Dr[idx[:-1], :, idx[1:], :]
        return lower, diag, upper

    def operators(self, dtype=np.longdouble):
        """Block-structured ``(M X, D X)`` for arrays shaped ``(..., N, n)``.

        The entries are the float64 matrix entries cast to ``dtype``, so the
        products represent exactly the same operators as ``mass``/``stiffness``.
        """
        lower, diag, upper = (b.astype(dtype) for b in self.stiffness_bands())
        A = self.problem.A.astype(dtype)

        def apply_mass(X):
            return X @ A.T

        def apply_stiffness(X):
            Y = np.einsum("kij,...kj->...ki", diag, X)
            Y[..., 1:, :] += np.einsum("kij,...kj->...ki", lower, X[..., :-1, :])
            Y[..., :-1, :] += np.einsum("kij,...kj->...ki", upper, X[..., 1:, :])
            return Y

        return apply_mass, apply_stiffness


def assemble(problem: PdaeProblem, grid: GridSpec) -> MolSystem:
    expected = problem.length / (grid.N + 1)
    if abs(grid.h - expected) > 1e-12 * max(1.0, abs(expected)):
        raise DimensionMismatch(f"grid h={grid.h} inconsistent with domain (expected {expected})")
    N, n = grid.N, problem.n
    P = build_p(N, grid.h, problem.r, grid.delta)
    eye = np.eye(N)
    mass = np.kron(eye, problem.A)
    stiffness = -np.kron(P, problem.B) / grid.h**2 - np.kron(eye, problem.C)
    p_x = 2 if (problem.r == 0.0 or grid.delta == 0.5) else 1
    return MolSystem(
        dim=N * n,
        mass=mass,
        stiffness=stiffness,
        forcing=MolForcing(problem, grid),
        grid=grid,
        problem=problem,
        p_x=p_x,
    )


def truncation_error(mol: MolSystem, t: float) -> np.ndarray:
    """Space truncation error ``M U_h' - D U_h - F`` of the exact solution."""
    p = mol.problem
    if p.exact_t is None:
        raise ValueError("truncation error needs the analytic time derivative of the exact solution")
    Uh = exact_on_grid(p, t, mol.grid)
    x = mol.grid.points(p.x_lo)
    dUh = eval_on_points(p.exact_t, t, x, p.n).ravel()
    return mol.mass @ dUh - mol.stiffness @ Uh - mol.forcing(t)
