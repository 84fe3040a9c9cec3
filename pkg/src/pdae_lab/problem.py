"""Linear PDAE problems ``A u_t + B (u_xx + r u_x) + C u = f`` and the built-ins.

Every data function takes ``t`` and a spatial coordinate ``x`` that may be a
scalar or a 1-d array. For scalar ``x`` it returns an ``(n,)`` vector, for an
array of ``N`` points an ``(N, n)`` array. Built-in problems follow this
convention; user functions that only handle scalars still work because grid
evaluation falls back to a point loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from .linalg import DimensionMismatch

__all__ = [
    "PdaeProblem",
    "BuiltinId",
    "NoExactSolution",
    "CoilParameters",
    "builtin",
    "builtin_ids",
    "residual",
    "exact_on_grid",
    "eval_on_points",
]

SpaceTimeFn = Callable[[float, "np.ndarray | float"], np.ndarray]


class NoExactSolution(LookupError):
    pass


def eval_on_points(fn, t, x: np.ndarray, n: int) -> np.ndarray:
    """Evaluate ``fn(t, x)`` at every point of ``x``; returns shape ``(len(x), n)``."""
    x = np.asarray(x, dtype=float)
    try:
        v = np.asarray(fn(t, x), dtype=float)
        if v.shape == (x.size, n):
            return v
    except Exception:  # scalar-only user callbacks
        pass
    return np.array([np.asarray(fn(t, float(xi)), dtype=float).reshape(n) for xi in x]).reshape(
        x.size, n
    )


@dataclass(frozen=True)
class PdaeProblem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    r: float
    x_lo: float
    x_hi: float
    t0: float
    te: float
    forcing: SpaceTimeFn
    initial: Callable
    dirichlet_lo: Callable[[float], np.ndarray]
    dirichlet_hi: Callable[[float], np.ndarray]
    exact: Optional[SpaceTimeFn] = None
    # analytic derivatives of ``exact``; only tests and truncation checks use them
    exact_t: Optional[SpaceTimeFn] = None
    exact_x: Optional[SpaceTimeFn] = None
    exact_xx: Optional[SpaceTimeFn] = None
    bc_time_derivative_vanishing_order: Optional[int] = None
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("A", "B", "C"):
            m = np.array(getattr(self, name), dtype=float)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        n = self.A.shape[0]
        for name in ("A", "B", "C"):
            if getattr(self, name).shape != (n, n):
                raise DimensionMismatch(f"{name} must be {n}x{n}, got {getattr(self, name).shape}")
        if not self.x_lo < self.x_hi:
            raise ValueError("x_lo must be smaller than x_hi")
        if not self.t0 < self.te:
            raise ValueError("t0 must be smaller than te")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo


def residual(problem: PdaeProblem, t, x, du_dt, du_dx, d2u_dx2, u) -> np.ndarray:
    """Pointwise PDAE residual ``A u_t + B (u_xx + r u_x) + C u - f``."""
    n = problem.n
    vecs = [np.asarray(v, dtype=float) for v in (du_dt, du_dx, d2u_dx2, u)]
    for v in vecs:
        if v.shape != (n,):
            raise DimensionMismatch(f"expected vectors of length {n}, got {v.shape}")
    ut, ux, uxx, uu = vecs
    f = np.asarray(problem.forcing(t, x), dtype=float).reshape(n)
    return problem.A @ ut + problem.B @ (uxx + problem.r * ux) + problem.C @ uu - f


def exact_on_grid(problem: PdaeProblem, t, grid) -> np.ndarray:
    """Exact solution at the interior grid points, stacked point by point."""
    if problem.exact is None:
        raise NoExactSolution(f"problem {problem.label!r} has no exact solution")
    x = problem.x_lo + grid.h * np.arange(1, grid.N + 1)
    return eval_on_points(problem.exact, t, x, problem.n).ravel()


# --- manufactured data -------------------------------------------------------


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _manufactured_forcing(A, B, C, r, u, u_t, u_x, u_xx, t, x):
    return u_t(t, x) @ A.T + (u_xx(t, x) + r * u_x(t, x)) @ B.T + u(t, x) @ C.T


def _trace(fn, x0, t):
    return np.asarray(fn(t, x0), dtype=float)


def _at_t0(fn, t0, x):
    return fn(t0, x)


# index-3 BTCS example: u = x(x-1) (sin t, cos t, e^t + t^5)
def _i3_u(t, x):
    x = np.asarray(x, dtype=float)
    g = x * (x - 1.0)
    return _stack(g * np.sin(t), g * np.cos(t), g * (np.exp(t) + t**5))


def _i3_ut(t, x):
    x = np.asarray(x, dtype=float)
    g = x * (x - 1.0)
    return _stack(g * np.cos(t), -g * np.sin(t), g * (np.exp(t) + 5.0 * t**4))


def _i3_ux(t, x):
    x = np.asarray(x, dtype=float)
    g = 2.0 * x - 1.0
    return _stack(g * np.sin(t), g * np.cos(t), g * (np.exp(t) + t**5))


def _i3_uxx(t, x):
    x = np.asarray(x, dtype=float)
    two = 2.0 + 0.0 * x
    return _stack(two * np.sin(t), two * np.cos(t), two * (np.exp(t) + t**5))


# index-1 example, inhomogeneous boundary data: u = x^2 (e^-t, e^-t/2, sin t)
def _r1_u(t, x):
    x2 = np.asarray(x, dtype=float) ** 2
    return _stack(x2 * np.exp(-t), x2 * np.exp(-0.5 * t), x2 * np.sin(t))


def _r1_ut(t, x):
    x2 = np.asarray(x, dtype=float) ** 2
    return _stack(-x2 * np.exp(-t), -0.5 * x2 * np.exp(-0.5 * t), x2 * np.cos(t))


def _r1_ux(t, x):
    x = np.asarray(x, dtype=float)
    return _stack(2 * x * np.exp(-t), 2 * x * np.exp(-0.5 * t), 2 * x * np.sin(t))


def _r1_uxx(t, x):
    two = 2.0 + 0.0 * np.asarray(x, dtype=float)
    return _stack(two * np.exp(-t), two * np.exp(-0.5 * t), two * np.sin(t))


# index-1 example whose boundary traces of B u are cubic in t
def _h4_u(t, x):
    x = np.asarray(x, dtype=float)
    return _stack(
        (x**2 - 1) * np.exp(-t) + t**3 * np.cos(x) ** 2,
        x**2 * np.exp(-0.5 * t),
        (x**2 - 1) * np.sin(t) + t**3 * np.sin(x) ** 2,
    )


def _h4_ut(t, x):
    x = np.asarray(x, dtype=float)
    return _stack(
        -(x**2 - 1) * np.exp(-t) + 3 * t**2 * np.cos(x) ** 2,
        -0.5 * x**2 * np.exp(-0.5 * t),
        (x**2 - 1) * np.cos(t) + 3 * t**2 * np.sin(x) ** 2,
    )


def _h4_ux(t, x):
    x = np.asarray(x, dtype=float)
    return _stack(
        2 * x * np.exp(-t) - t**3 * np.sin(2 * x),
        2 * x * np.exp(-0.5 * t),
        2 * x * np.sin(t) + t**3 * np.sin(2 * x),
    )


def _h4_uxx(t, x):
    x = np.asarray(x, dtype=float)
    return _stack(
        2 * np.exp(-t) - 2 * t**3 * np.cos(2 * x),
        2 * np.exp(-0.5 * t) + 0.0 * x,
        2 * np.sin(t) + 2 * t**3 * np.cos(2 * x),
    )


@dataclass(frozen=True)
class CoilParameters:
    """Superconducting coil constants: inductance, capacitance, D, length, source voltage."""

    L: float = 1.0
    C: float = 1.0
    D: float = 1.0
    l: float = 1.0
    E: float = 1.0


def _coil_initial(p: CoilParameters, x):
    x = np.asarray(x, dtype=float)
    cde = p.C * p.D * p.E
    u1 = (p.E / p.l - cde * p.l / 6.0) * x + cde / (6.0 * p.l) * x**3
    u2 = cde / p.l * x
    zero = 0.0 * x
    return _stack(u1, u2, zero, zero)


def _coil_forcing(t, x):
    return np.zeros(np.shape(x) + (4,))


def _const(vec, t):
    return np.array(vec, dtype=float)


class BuiltinId(str, enum.Enum):
    INDEX3_BTCS = "index3-btcs"
    RADAU_INDEX1_INHOMOG = "radau-index1-inhomog"
    RADAU_INDEX1_HOMOG4 = "radau-index1-homog4"
    COIL = "coil"

    # CamelCase aliases
    Index3BtCs = "index3-btcs"
    RadauIndex1Inhomog = "radau-index1-inhomog"
    RadauIndex1Homog4 = "radau-index1-homog4"
    Coil = "coil"

    @classmethod
    def _missing_(cls, value):
        # accept member names as well as values
        return cls.__members__.get(value) if isinstance(value, str) else None


def builtin_ids() -> list[BuiltinId]:
    return [BuiltinId.INDEX3_BTCS, BuiltinId.RADAU_INDEX1_INHOMOG, BuiltinId.RADAU_INDEX1_HOMOG4, BuiltinId.COIL]


_I3 = dict(
    A=[[0, 1, 0], [0, 0, 1], [0, 0, 0]],
    B=[[0, 0, -1], [0, -1, -1], [0, 0, 0]],
    C=[[-1, -1, -1], [0, -1, 0], [0, 0, -1]],
)
_R1 = dict(
    A=[[0, 2, 0], [1, -1, 0], [1, -1, 0]],
    B=[[-1, 0, 0], [0, 0, 0], [0, 0, -1]],
    C=[[0, 0, 0], [0, -1, 0], [0, 0, 1]],
)


def _manufactured(mats, r, x_lo, x_hi, t0, te, u, ut, ux, uxx, label, vanishing=None):
    A, B, C = (np.array(mats[k], dtype=float) for k in "ABC")
    return PdaeProblem(
        A=A,
        B=B,
        C=C,
        r=r,
        x_lo=x_lo,
        x_hi=x_hi,
        t0=t0,
        te=te,
        forcing=partial(_manufactured_forcing, A, B, C, r, u, ut, ux, uxx),
        initial=partial(_at_t0, u, t0),
        dirichlet_lo=partial(_trace, u, x_lo),
        dirichlet_hi=partial(_trace, u, x_hi),
        exact=u,
        exact_t=ut,
        exact_x=ux,
        exact_xx=uxx,
        bc_time_derivative_vanishing_order=vanishing,
        label=label,
    )


def coil(params: CoilParameters | None = None, t_end: float = 1.0) -> PdaeProblem:
    """Superconducting coil problem as a first-order PDAE in time on ``(0, l)``."""
    p = params or CoilParameters()
    A = np.array(
        [
            [0, 0, 0, 0],
            [0, 0, -p.L * p.C / p.l**2, p.L / p.D],
            [1, 0, 0, 0],
            [0, 1, 0, 0],
        ],
        dtype=float,
    )
    B = -np.diag([1.0, 1.0, 0.0, 0.0])
    C = np.array([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]], dtype=float)
    return PdaeProblem(
        A=A,
        B=B,
        C=C,
        r=0.0,
        x_lo=0.0,
        x_hi=p.l,
        t0=0.0,
        te=t_end,
        forcing=_coil_forcing,
        initial=partial(_coil_initial, p),
        dirichlet_lo=partial(_const, (0.0, 0.0, 0.0, 0.0)),
        dirichlet_hi=partial(_const, (p.E, p.C * p.D * p.E, 0.0, 0.0)),
        label="coil",
        params={"L": p.L, "C": p.C, "D": p.D, "l": p.l, "E": p.E},
    )


def builtin(id: BuiltinId | str, coil_params: CoilParameters | None = None) -> PdaeProblem:
    """Return one of the shipped example problems."""
    bid = BuiltinId(id)
    if bid is BuiltinId.INDEX3_BTCS:
        return _manufactured(_I3, 0.0, -0.5, 0.5, 0.0, 1.0, _i3_u, _i3_ut, _i3_ux, _i3_uxx, bid.value)
    if bid is BuiltinId.RADAU_INDEX1_INHOMOG:
        return _manufactured(_R1, 0.0, -1.0, 1.0, 0.0, 1.0, _r1_u, _r1_ut, _r1_ux, _r1_uxx, bid.value)
    if bid is BuiltinId.RADAU_INDEX1_HOMOG4:
        return _manufactured(
            _R1, 0.0, -1.0, 1.0, 0.0, 1.0, _h4_u, _h4_ut, _h4_ux, _h4_uxx, bid.value, vanishing=4
        )
    return coil(coil_params)
