"""Error norms, observed orders and ``(h, tau)`` refinement sweeps.

A sweep holds the spatial grid fixed along each row and halves ``tau`` along
the columns, so the observed temporal order in column ``j`` is
``log2(err[j-1] / err[j])``. Columns are labelled by the exponent of the finer
step, matching the layout of the reference tables.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .discretize import GridSpec, assemble
from .index import differential_time_index
from .integrate import integrate, step_count
from .problem import PdaeProblem, builtin, exact_on_grid
from .tableau import ButcherTableau, OrderPrediction, bc_vanishing_for, by_name, predict_order

__all__ = [
    "NonpositiveError",
    "ReferenceKind",
    "ErrorRecord",
    "CellFailure",
    "ConvergenceTable",
    "Reproduction",
    "CellCheck",
    "ReproductionResult",
    "REPRODUCTIONS",
    "FINE_TAU_FACTOR",
    "SPATIAL_FLAG_RATIO",
    "discrete_l2",
    "final_error",
    "observed_orders",
    "run_sweep",
    "predict_for",
    "reproduce",
]

FINE_TAU_FACTOR = 4
FINE_TAU_HALVINGS = 2
SPATIAL_FLAG_RATIO = 2.0**0.2


class NonpositiveError(ValueError):
    pass


class ReferenceKind(str, enum.Enum):
    EXACT = "Exact"
    FINE_TAU = "FineTau"


def discrete_l2(v, h: float) -> float:
    """``sqrt(h * sum |v_i|^2)`` over all entries of ``v``."""
    if not h > 0:
        raise ValueError("h must be positive")
    v = np.abs(np.asarray(v).ravel())
    scale = v.max(initial=0.0)
    if scale == 0.0 or not np.isfinite(scale):
        return float(math.sqrt(h) * scale)
    # scale first so tiny or huge entries neither underflow nor overflow when squared
    return float(math.sqrt(h) * scale * np.linalg.norm(v / scale))


@dataclass(frozen=True)
class ErrorRecord:
    h_exponent: int
    tau_exponent: int
    N: int
    M_e: int
    error: float
    reference_kind: ReferenceKind

    def __post_init__(self):
        if not self.error >= 0:
            raise ValueError(f"error must be non-negative, got {self.error}")


def _resolve_reference(problem: PdaeProblem, reference: str) -> ReferenceKind:
    if reference == "auto":
        return ReferenceKind.EXACT if problem.has_exact else ReferenceKind.FINE_TAU
    if reference in ("exact", ReferenceKind.EXACT):
        if not problem.has_exact:
            raise ValueError(f"problem {problem.label!r} has no exact solution")
        return ReferenceKind.EXACT
    if reference in ("fine_tau", "fine-tau", ReferenceKind.FINE_TAU):
        return ReferenceKind.FINE_TAU
    raise ValueError(f"unknown reference {reference!r}")


def final_error(
    problem: PdaeProblem,
    grid: GridSpec,
    tableau: ButcherTableau,
    tau: float,
    reference: str = "auto",
    *,
    h_exponent: int = 0,
    tau_exponent: int = 0,
    method: str = "auto",
) -> ErrorRecord:
    """Discrete L2 error at ``te`` against the exact solution or a ``tau/4`` run.

    With ``reference="auto"`` the exact solution is used when the problem has
    one; otherwise the same grid and tableau are integrated again with a step
    four times smaller and the two final states are compared.
    """
    kind = _resolve_reference(problem, reference)
    mol = assemble(problem, grid)
    M_e = step_count(problem, tau)
    U = integrate(problem, grid, tableau, tau, mol=mol, method=method).final
    if kind is ReferenceKind.EXACT:
        ref = exact_on_grid(problem, problem.te, grid)
    else:
        ref = integrate(problem, grid, tableau, tau / FINE_TAU_FACTOR, mol=mol, method=method).final
    return ErrorRecord(
        h_exponent=h_exponent,
        tau_exponent=tau_exponent,
        N=grid.N,
        M_e=M_e,
        error=discrete_l2(ref - U, grid.h),
        reference_kind=kind,
    )


def observed_orders(errors: Sequence[float]) -> np.ndarray:
    """``log2(e_{j-1} / e_j)`` for successive errors under ``tau`` halving."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need at least two errors")
    if np.any(~(e > 0)):
        raise NonpositiveError("observed orders need strictly positive errors")
    return np.log2(e[:-1]) - np.log2(e[1:])


@dataclass(frozen=True)
class CellFailure:
    h_exponent: int
    tau_exponent: int
    message: str


@dataclass
class ConvergenceTable:
    """Errors and observed orders of an ``(h, tau)`` sweep.

    ``errors[i][j]`` belongs to ``h_base / 2**rows[i]`` and
    ``tau_base / 2**cols[j]``; ``orders[i, j]`` compares it with column
    ``j - 1`` and is NaN in column 0 or where a neighbour is missing.
    ``spatially_dominated[i, j]`` marks orders whose error ratio is below
    ``2**0.2``, i.e. where the fixed spatial error leaves no temporal signal.
    """

    rows: tuple
    cols: tuple
    h_base: float
    tau_base: float
    delta: float
    errors: list
    orders: np.ndarray
    spatially_dominated: np.ndarray
    problem_label: str
    tableau_label: str
    predicted: Optional[OrderPrediction] = None
    prediction_note: str = ""
    nu_dt: Optional[int] = None
    failures: list = field(default_factory=list)

    @property
    def order_cols(self) -> tuple:
        """Column exponents that carry an order (all but the first)."""
        return self.cols[1:]

    def error_matrix(self) -> np.ndarray:
        out = np.full((len(self.rows), len(self.cols)), np.nan)
        for i, row in enumerate(self.errors):
            for j, rec in enumerate(row):
                if rec is not None:
                    out[i, j] = rec.error
        return out

    def order(self, h_exponent: int, tau_exponent: int) -> float:
        return float(self.orders[self.rows.index(h_exponent), self.cols.index(tau_exponent)])

    def usable_orders(self) -> np.ndarray:
        """Orders that are defined and not flagged as spatially dominated."""
        o = self.orders[:, 1:]
        return o[np.isfinite(o) & ~self.spatially_dominated[:, 1:]]

    def finest_order(self) -> float:
        """Order in the finest ``h`` row and the finest ``tau`` column."""
        return float(self.orders[-1, -1]) if len(self.cols) > 1 else math.nan


def predict_for(
    problem: PdaeProblem, tableau: ButcherTableau, grid: GridSpec, full: bool = False
) -> tuple[int, Optional[OrderPrediction], str]:
    """Index on ``grid`` and the predicted order, or a note saying why there is none."""
    nu = differential_time_index(problem, grid, full=full).nu_dt
    try:
        pred = predict_order(tableau, nu, bc_vanishing_for(problem, tableau))
    except (ValueError, LookupError) as exc:
        return nu, None, str(exc)
    return nu, pred, ""


def _default_jobs() -> int:
    return min(8, os.cpu_count() or 1)


def run_sweep(
    problem: PdaeProblem,
    tableau: ButcherTableau,
    h_exponents: Sequence[int],
    tau_exponents: Sequence[int],
    h_base: float,
    tau_base: float,
    delta: float = 0.5,
    reference: str = "auto",
    jobs: Optional[int] = None,
    method: str = "auto",
    predict: bool = True,
    full_index_sweep: bool = False,
) -> ConvergenceTable:
    """Fill the error and order grid for ``h = h_base/2**e``, ``tau = tau_base/2**j``.

    Every distinct ``(h, tau)`` integration runs once, so a fine-step
    reference that coincides with another column is shared. Cells run in a
    thread pool; the table is assembled in input order, which keeps the
    result independent of scheduling.
    """
    rows = tuple(int(e) for e in h_exponents)
    cols = tuple(int(j) for j in tau_exponents)
    if not rows or not cols:
        raise ValueError("exponent lists must not be empty")
    kind = _resolve_reference(problem, reference)
    grids = {e: GridSpec.from_h(problem, h_base / 2**e, delta) for e in rows}
    taus = set(cols)
    if kind is ReferenceKind.FINE_TAU:
        taus |= {j + FINE_TAU_HALVINGS for j in cols}
    for j in taus:
        step_count(problem, tau_base / 2**j)

    mols = {e: assemble(problem, grids[e]) for e in rows}
    tasks = [(e, j) for e in rows for j in sorted(taus)]

    def run(task):
        e, j = task
        tau = tau_base / 2**j
        try:
            return integrate(problem, grids[e], tableau, tau, mol=mols[e], method=method).final
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return CellFailure(e, j, f"{type(exc).__name__}: {exc}")

    workers = jobs if jobs is not None else _default_jobs()
    if workers > 1 and len(tasks) > 1:
        # largest first so the long cells do not trail at the end
        order = sorted(tasks, key=lambda t: -(grids[t[0]].N * 2 ** t[1]))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            finals = dict(zip(order, pool.map(run, order)))
    else:
        finals = {t: run(t) for t in tasks}

    failures = [v for v in finals.values() if isinstance(v, CellFailure)]
    errors = []
    for e in rows:
        row = []
        grid = grids[e]
        exact = exact_on_grid(problem, problem.te, grid) if kind is ReferenceKind.EXACT else None
        for j in cols:
            U = finals[(e, j)]
            ref = exact if exact is not None else finals[(e, j + FINE_TAU_HALVINGS)]
            if isinstance(U, CellFailure) or isinstance(ref, CellFailure):
                row.append(None)
                continue
            row.append(
                ErrorRecord(
                    h_exponent=e,
                    tau_exponent=j,
                    N=grid.N,
                    M_e=step_count(problem, tau_base / 2**j),
                    error=discrete_l2(ref - U, grid.h),
                    reference_kind=kind,
                )
            )
        errors.append(row)

    orders = np.full((len(rows), len(cols)), np.nan)
    flagged = np.zeros((len(rows), len(cols)), dtype=bool)
    for i, row in enumerate(errors):
        for j in range(1, len(cols)):
            prev, cur = row[j - 1], row[j]
            if prev is None or cur is None or not (prev.error > 0 and cur.error > 0):
                continue
            ratio = prev.error / cur.error
            orders[i, j] = math.log2(ratio)
            flagged[i, j] = ratio < SPATIAL_FLAG_RATIO

    nu, pred, note = (None, None, "")
    if predict:
        nu, pred, note = predict_for(problem, tableau, grids[rows[0]], full=full_index_sweep)

    return ConvergenceTable(
        rows=rows,
        cols=cols,
        h_base=h_base,
        tau_base=tau_base,
        delta=delta,
        errors=errors,
        orders=orders,
        spatially_dominated=flagged,
        problem_label=problem.label,
        tableau_label=tableau.label,
        predicted=pred,
        prediction_note=note,
        nu_dt=nu,
        failures=failures,
    )


@dataclass(frozen=True)
class CellCheck:
    h_exponent: int
    tau_exponent: int
    observed: float
    expected: float
    lo: float
    hi: float

    @property
    def passed(self) -> bool:
        return bool(self.lo <= self.observed <= self.hi)


@dataclass(frozen=True)
class ReproductionResult:
    name: str
    table: ConvergenceTable
    cells: tuple

    @property
    def passed(self) -> bool:
        return bool(self.cells) and all(c.passed for c in self.cells)


@dataclass(frozen=True)
class Reproduction:
    """One reference convergence table: its configuration and target orders.

    ``target_orders`` maps each ``h`` exponent to the target orders of the
    columns ``tau_exponents[1:]``. A cell passes when it lies within
    ``tol`` of the target value, or inside ``band`` when a band is given.
    """

    name: str
    problem_id: str
    tableau_name: str
    h_base: float
    tau_base: float
    h_exponents: tuple
    tau_exponents: tuple
    target_orders: dict
    reference: str = "auto"
    tol: float = 0.05
    band: Optional[tuple] = None
    note: str = ""

    def problem(self) -> PdaeProblem:
        return builtin(self.problem_id)

    def tableau(self) -> ButcherTableau:
        return by_name(self.tableau_name)

    def limits(self, expected: float) -> tuple[float, float]:
        if self.band is not None:
            return self.band
        return expected - self.tol, expected + self.tol

    def check(self, table: ConvergenceTable) -> ReproductionResult:
        cells = []
        for e, targets in self.target_orders.items():
            for j, expected in zip(table.order_cols, targets):
                lo, hi = self.limits(expected)
                cells.append(CellCheck(e, j, table.order(e, j), expected, lo, hi))
        return ReproductionResult(self.name, table, tuple(cells))


def _rows(exps, values):
    return {e: tuple(values) for e in exps}


REPRODUCTIONS = {
    "table1": Reproduction(
        name="table1",
        problem_id="index3-btcs",
        tableau_name="euler",
        h_base=0.1,
        tau_base=0.1,
        h_exponents=(2, 3, 4),
        tau_exponents=(1, 2, 3, 4, 5, 6, 7),
        target_orders=_rows((2, 3, 4), (0.81, 0.91, 0.96, 0.98, 0.99, 0.99)),
        reference="exact",
    ),
    "table2": Reproduction(
        name="table2",
        problem_id="radau-index1-inhomog",
        tableau_name="radau3",
        h_base=0.2,
        tau_base=0.1,
        h_exponents=(3, 4, 5, 6),
        tau_exponents=(0, 1, 2, 3),
        target_orders={
            3: (4.27, 4.28, 4.30),
            4: (4.26, 4.26, 4.26),
            5: (4.26, 4.26, 4.25),
            6: (4.26, 4.26, 4.25),
        },
        reference="exact",
        band=(4.20, 4.40),
    ),
    "tabelle4": Reproduction(
        name="tabelle4",
        problem_id="radau-index1-homog4",
        tableau_name="radau3",
        h_base=0.2,
        tau_base=0.1,
        h_exponents=(3, 4, 5, 6),
        tau_exponents=(1, 2, 3),
        target_orders=_rows((3, 4, 5, 6), (5.00, 5.00)),
        reference="fine_tau",
        note="fine-step reference: against the exact solution the O(h^2) spatial error hides the temporal one",
    ),
    "tabelle6": Reproduction(
        name="tabelle6",
        problem_id="coil",
        tableau_name="radau3",
        h_base=0.2,
        tau_base=0.1,
        h_exponents=(2, 3, 4),
        tau_exponents=(3, 4, 5, 6),
        target_orders=_rows((2, 3, 4), (3.00, 3.00, 3.00)),
        reference="fine_tau",
        note="coil parameters all 1; only orders are compared",
    ),
}


def reproduce(name: str, jobs: Optional[int] = None) -> ReproductionResult:
    """Run one of :data:`REPRODUCTIONS` and check it against the target orders."""
    try:
        cfg = REPRODUCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown reproduction {name!r}; choose from {sorted(REPRODUCTIONS)}") from None
    table = run_sweep(
        cfg.problem(),
        cfg.tableau(),
        cfg.h_exponents,
        cfg.tau_exponents,
        cfg.h_base,
        cfg.tau_base,
        reference=cfg.reference,
        jobs=jobs,
    )
    return cfg.check(table)
