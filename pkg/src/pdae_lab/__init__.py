"""Linear PDAEs ``A u_t + B (u_xx + r u_x) + C u = f`` with singular ``A``.

Method-of-lines finite differences in space, implicit Runge-Kutta methods in
time, Kronecker index analysis of the mode pencils, predicted temporal orders
and measured ones.
"""

from .convergence import (
    ConvergenceTable,
    ErrorRecord,
    REPRODUCTIONS,
    discrete_l2,
    final_error,
    observed_orders,
    reproduce,
    run_sweep,
)
from .discretize import GridSpec, MolSystem, assemble, build_p, p_spectrum
from .index import differential_time_index, pencil_index, pencil_regular
from .integrate import factor_stage_matrix, integrate, step
from .problem import BuiltinId, CoilParameters, PdaeProblem, builtin, builtin_ids
from .tableau import ButcherTableau, backward_euler, by_name, predict_order, radau_iia

__version__ = "0.1.0"

__all__ = [
    "BuiltinId",
    "ButcherTableau",
    "CoilParameters",
    "ConvergenceTable",
    "ErrorRecord",
    "GridSpec",
    "MolSystem",
    "PdaeProblem",
    "REPRODUCTIONS",
    "assemble",
    "backward_euler",
    "build_p",
    "builtin",
    "builtin_ids",
    "by_name",
    "differential_time_index",
    "discrete_l2",
    "factor_stage_matrix",
    "final_error",
    "integrate",
    "observed_orders",
    "p_spectrum",
    "pencil_index",
    "pencil_regular",
    "predict_order",
    "radau_iia",
    "reproduce",
    "run_sweep",
    "step",
]
