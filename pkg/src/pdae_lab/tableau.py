"""Implicit Runge-Kutta tableaus, their stability diagnostics and order prediction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "ButcherTableau",
    "OrderPrediction",
    "Regime",
    "HypothesisViolated",
    "UnknownClassicalDaeOrder",
    "UnsupportedStageCount",
    "PoleOfR",
    "backward_euler",
    "radau_iia",
    "implicit_midpoint",
    "by_name",
    "TABLEAU_NAMES",
    "stability_function",
    "r_at_infinity",
    "check_simplifying_conditions",
    "check_hypotheses",
    "classical_dae_order",
    "predict_order",
    "bc_vanishing_for",
]


class UnsupportedStageCount(ValueError):
    pass


class PoleOfR(ZeroDivisionError):
    pass


class HypothesisViolated(ValueError):
    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        super().__init__(f"{hypothesis}: {detail}" if detail else hypothesis)


class UnknownClassicalDaeOrder(LookupError):
    pass


@dataclass(frozen=True)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    p: int
    q: int
    label: str
    family: str = "custom"

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = np.array(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        s = len(self.b)
        if self.a.shape != (s, s) or self.c.shape != (s,):
            raise ValueError("inconsistent tableau shapes")

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.allclose(self.a[-1], self.b, rtol=0, atol=1e-14))


def backward_euler() -> ButcherTableau:
    return ButcherTableau(
        a=[[1.0]], b=[1.0], c=[1.0], p=1, q=1, label="backward-euler", family="backward-euler"
    )


def implicit_midpoint() -> ButcherTableau:
    return ButcherTableau(a=[[0.5]], b=[1.0], c=[0.5], p=2, q=1, label="implicit-midpoint")


def _radau_right_nodes(s: int) -> np.ndarray:
    # roots of d^{s-1}/dx^{s-1} [x^{s-1} (x-1)^s]; x = 1 is always one of them
    poly = npoly.polymul(npoly.polypow([0.0, 1.0], s - 1), npoly.polypow([-1.0, 1.0], s))
    q = npoly.polyder(poly, s - 1) if s > 1 else poly
    dq = npoly.polyder(q)
    roots = np.sort(np.real(npoly.polyroots(q)))
    for k, x in enumerate(roots):
        for _ in range(50):
            step = npoly.polyval(x, q) / npoly.polyval(x, dq)
            x -= step
            if abs(step) < 1e-15:
                break
        roots[k] = x
    roots[-1] = 1.0
    return roots


def radau_iia(s: int) -> ButcherTableau:
    """Radau IIA collocation method with ``s`` stages (order ``2s-1``, stage order ``s``)."""
    if s not in (1, 2, 3):
        raise UnsupportedStageCount(f"Radau IIA with s={s} stages is not provided")
    if s == 1:
        return backward_euler()
    c = _radau_right_nodes(s)
    k = np.arange(1, s + 1)
    V = c[:, None] ** (k - 1)  # V[j, k] = c_j^(k-1)
    W = c[:, None] ** k / k  # W[i, k] = c_i^k / k
    # C(s): a @ V = W
    a = np.linalg.solve(V.T, W.T).T
    b = np.linalg.solve(V.T, 1.0 / k)
    return ButcherTableau(a=a, b=b, c=c, p=2 * s - 1, q=s, label=f"radau-iia-{s}", family="radau-iia")


TABLEAU_NAMES = {
    "euler": backward_euler,
    "radau1": lambda: radau_iia(1),
    "radau2": lambda: radau_iia(2),
    "radau3": lambda: radau_iia(3),
    "midpoint": implicit_midpoint,
}


def by_name(name: str) -> ButcherTableau:
    try:
        return TABLEAU_NAMES[name]()
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; choose from {sorted(TABLEAU_NAMES)}") from None


def stability_function(t: ButcherTableau, z: complex) -> complex:
    """``R(z) = 1 + z b^T (I - z A)^{-1} 1``."""
    M = np.eye(t.s) - z * t.a
    if abs(np.linalg.det(M)) < 1e-14:
        raise PoleOfR(f"I - zA is singular at z={z}")
    return complex(1.0 + z * (t.b @ np.linalg.solve(M, np.ones(t.s, dtype=complex))))


def r_at_infinity(t: ButcherTableau) -> float:
    if abs(np.linalg.det(t.a)) < 1e-14:
        raise HypothesisViolated("regular-A", "Runge-Kutta matrix is singular")
    return float(1.0 - t.b @ np.linalg.solve(t.a, np.ones(t.s)))


def check_simplifying_conditions(t: ButcherTableau, p: int, q: int, tol: float = 1e-10) -> bool:
    """True iff ``B(k)`` holds for ``k <= p`` and ``C(k)`` for ``k <= q``."""
    for k in range(1, p + 1):
        if abs(t.b @ t.c ** (k - 1) - 1.0 / k) > tol:
            return False
    for k in range(1, q + 1):
        if np.max(np.abs(t.a @ t.c ** (k - 1) - t.c**k / k)) > tol:
            return False
    return True


class Regime(str, enum.Enum):
    INDEX01_INHOMOG = "Index01Inhomog"
    INDEX01_HOMOG = "Index01Homog"
    HIGH_INDEX = "HighIndex"


@dataclass(frozen=True)
class OrderPrediction:
    p_star: float
    p_nu: int
    regime: Regime
    epsilon_flag: bool
    hypotheses: dict = field(default_factory=dict)

    def describe(self) -> str:
        txt = f"{self.p_star:g}"
        return txt + "-eps" if self.epsilon_flag else txt


def _imag_axis_samples(n: int = 4001, tmax: float = 1e3) -> np.ndarray:
    pos = np.geomspace(1e-3, tmax, n // 2)
    return np.concatenate([-pos[::-1], pos])


def check_hypotheses(t: ButcherTableau, nu_dt: int) -> dict:
    """Sampled checks of the Runge-Kutta assumptions of the convergence theorem.

    Values are ``True``/``False`` for checked hypotheses and ``None`` where the
    check is not applicable or not decidable here.
    """
    out: dict[str, Optional[bool]] = {}
    regular = abs(np.linalg.det(t.a)) > 1e-14
    out["regular-A"] = bool(regular)
    ts = _imag_axis_samples()
    Rit = np.array([stability_function(t, 1j * y) for y in ts])
    eig = np.linalg.eigvals(t.a) if regular else np.array([])
    poles_right = bool(regular and np.all(eig.real > 0))
    a_stable = poles_right and bool(np.all(np.abs(Rit) <= 1.0 + 1e-12))
    r_inf = r_at_infinity(t) if regular else math.nan
    if nu_dt >= 2:
        out["L-stable"] = bool(a_stable and abs(r_inf) < 1e-12)
    else:
        out["A-stable, R(-inf) < 1"] = bool(a_stable and r_inf < 1.0)
    out["R(it) != 1"] = bool(np.all(np.abs(Rit - 1.0) > 1e-14))
    if 2 <= nu_dt <= 4:
        out["q >= nu_dt - 2"] = t.q >= nu_dt - 2
    elif nu_dt > 4:
        out["q >= nu_dt - 2"] = None
    return out


def classical_dae_order(t: ButcherTableau, nu_dt: int) -> int:
    """Order of the method on constant-coefficient linear DAEs of index ``nu_dt``."""
    if t.family == "backward-euler":
        return 1
    if t.family == "radau-iia":
        return 2 * t.s - 1 if nu_dt <= 1 else t.s + 2 - nu_dt
    raise UnknownClassicalDaeOrder(f"no DAE order lookup for {t.label!r}")


def predict_order(
    t: ButcherTableau, nu_dt: int, bc_vanishing: bool, p_nu: Optional[int] = None
) -> OrderPrediction:
    """Predicted temporal order ``p*`` on a PDAE of differential time index ``nu_dt``."""
    if nu_dt < 0:
        raise ValueError("index must be non-negative")
    hyp = check_hypotheses(t, nu_dt)
    for name, ok in hyp.items():
        if ok is False:
            raise HypothesisViolated(name, f"{t.label} at nu_dt={nu_dt}")
    if p_nu is None:
        p_nu = classical_dae_order(t, nu_dt)
    bound = t.q + (2.25 if bc_vanishing else 1.25)
    p_star = min(float(p_nu), bound)
    eps = bound < p_nu
    if nu_dt >= 2:
        regime = Regime.HIGH_INDEX
    else:
        regime = Regime.INDEX01_HOMOG if bc_vanishing else Regime.INDEX01_INHOMOG
    return OrderPrediction(p_star=p_star, p_nu=int(p_nu), regime=regime, epsilon_flag=eps, hypotheses=hyp)


def bc_vanishing_for(problem, t: ButcherTableau) -> bool:
    """Whether ``B d^{q+1}u/dt^{q+1}`` vanishes on the boundary for this method."""
    m = problem.bc_time_derivative_vanishing_order
    return m is not None and m <= t.q + 1
