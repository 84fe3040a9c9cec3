"""Command-line front end: ``pdae-lab {list, analyze, sweep, reproduce}``.

Exit codes are 0 on success, 1 for numerical or reproduction failures and 2
for usage or configuration errors.

A sweep configuration file holds flat ``key = value`` lines (``#`` starts a
comment). Keys are the long flag names with underscores, e.g.::

    problem = coil
    tableau = radau3
    h_exps = 2..4
    tau_exps = 3,4,5,6
    coil_l = 1.0

Flags given on the command line override values from the file.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .convergence import REPRODUCTIONS, ConvergenceTable, ReproductionResult, run_sweep
from .discretize import GridSpec
from .index import IrregularPencil, differential_time_index
from .problem import BuiltinId, CoilParameters, builtin, builtin_ids
from .tableau import TABLEAU_NAMES, HypothesisViolated, bc_vanishing_for, by_name, check_hypotheses, predict_order

__all__ = ["main", "build_parser", "SweepConfig", "UsageError", "parse_exponents", "render_table"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FORMATS = ("csv", "markdown", "json")
COIL_KEYS = ("l", "L", "C", "D", "E")


class UsageError(ValueError):
    pass


def parse_exponents(text: str) -> list[int]:
    """``"2,3,4"``, ``"2..4"`` or a mix such as ``"1..3,6"``."""
    out: list[int] = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = (int(v) for v in part.split(".."))
                if hi < lo:
                    raise UsageError(f"empty exponent range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"bad exponent list {text!r}") from None
    if not out:
        raise UsageError("exponent list is empty")
    return out


@dataclass(frozen=True)
class SweepConfig:
    problem: str
    tableau: str = "radau3"
    h_base: float = 0.2
    tau_base: float = 0.1
    h_exponents: tuple = ()
    tau_exponents: tuple = ()
    delta: float = 0.5
    reference: str = "auto"
    coil: Optional[CoilParameters] = None
    format: str = "csv"
    out: Optional[str] = None
    jobs: Optional[int] = None
    full_index_sweep: bool = False

    def validate(self) -> "SweepConfig":
        try:
            BuiltinId(self.problem)
        except ValueError:
            raise UsageError(f"unknown problem {self.problem!r}") from None
        if self.tableau not in TABLEAU_NAMES:
            raise UsageError(f"unknown tableau {self.tableau!r}")
        if not self.h_exponents or not self.tau_exponents:
            raise UsageError("both --h-exps and --tau-exps are required")
        if self.format not in FORMATS:
            raise UsageError(f"unknown format {self.format!r}")
        if not (self.h_base > 0 and self.tau_base > 0):
            raise UsageError("--h-base and --tau-base must be positive")
        if self.jobs is not None and self.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if self.reference not in ("auto", "exact", "fine_tau"):
            raise UsageError(f"unknown reference {self.reference!r}")
        return self


def read_config(path: str) -> dict:
    """Flat ``key = value`` file as a dict with normalized key names."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # keep case: coil_L and coil_l differ
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[sweep]\n" + fh.read(), source=path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    return {k.strip().replace("-", "_"): v.strip() for k, v in parser["sweep"].items()}


_CONFIG_KEYS = {
    "problem", "tableau", "h_base", "tau_base", "h_exps", "tau_exps", "delta", "reference",
    "format", "out", "jobs", "full_index_sweep",
} | {f"coil_{k}" for k in COIL_KEYS}


def _env_jobs() -> Optional[int]:
    raw = os.environ.get("PDAE_LAB_JOBS")
    if raw in (None, ""):
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PDAE_LAB_JOBS must be an integer, got {raw!r}") from None


def _coil_from(values: dict) -> Optional[CoilParameters]:
    given = {k: values.get(f"coil_{k}") for k in COIL_KEYS}
    given = {k: float(v) for k, v in given.items() if v is not None}
    if not given:
        return None
    params = replace(CoilParameters(), **given)
    if any(not getattr(params, k) > 0 for k in COIL_KEYS if k != "E"):
        raise UsageError("coil parameters L, C, D and l must be positive")
    return params


def config_from_args(args: argparse.Namespace) -> SweepConfig:
    values = read_config(args.config) if args.config else {}
    unknown = set(values) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    try:
        jobs = values.get("jobs")
        full = values.get("full_index_sweep", False)
        cfg = SweepConfig(
            problem=str(values.get("problem", "")),
            tableau=str(values.get("tableau", "radau3")),
            h_base=float(values.get("h_base", 0.2)),
            tau_base=float(values.get("tau_base", 0.1)),
            h_exponents=tuple(parse_exponents(values["h_exps"])) if "h_exps" in values else (),
            tau_exponents=tuple(parse_exponents(values["tau_exps"])) if "tau_exps" in values else (),
            delta=float(values.get("delta", 0.5)),
            reference=str(values.get("reference", "auto")).replace("-", "_"),
            coil=_coil_from(values),
            format=str(values.get("format", "csv")),
            out=values.get("out"),
            jobs=int(jobs) if jobs is not None else _env_jobs(),
            full_index_sweep=full if isinstance(full, bool) else str(full).lower() in ("1", "true", "yes"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad configuration value: {exc}") from None
    return cfg.validate()


# ---------------------------------------------------------------- rendering


def _fmt_err(v) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.6e}"


def _fmt_order(v, digits: int = 4) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.{digits}f}"


def _prediction_dict(table: ConvergenceTable) -> Optional[dict]:
    p = table.predicted
    if p is None:
        return None
    return {
        "p_star": p.p_star,
        "p_nu": p.p_nu,
        "regime": p.regime.value,
        "epsilon_flag": p.epsilon_flag,
        "hypotheses": p.hypotheses,
    }


def _metadata(table: ConvergenceTable, check: Optional[ReproductionResult]) -> list[tuple[str, str]]:
    p = table.predicted
    meta = [
        ("problem", table.problem_label),
        ("tableau", table.tableau_label),
        ("h_base", repr(table.h_base)),
        ("tau_base", repr(table.tau_base)),
        ("delta", repr(table.delta)),
        ("reference", table.errors[0][0].reference_kind.value if table.errors[0][0] else ""),
        ("nu_dt", "" if table.nu_dt is None else str(table.nu_dt)),
        ("p_star", p.describe() if p else table.prediction_note or "n/a"),
    ]
    if check is not None:
        meta.append(("reproduction", f"{check.name} {'PASS' if check.passed else 'FAIL'}"))
    return meta


def _as_json(table: ConvergenceTable, check: Optional[ReproductionResult]) -> str:
    def num(v):
        return None if v is None or not math.isfinite(v) else float(v)

    doc = {
        "problem": table.problem_label,
        "tableau": table.tableau_label,
        "h_base": table.h_base,
        "tau_base": table.tau_base,
        "delta": table.delta,
        "h_exponents": list(table.rows),
        "tau_exponents": list(table.cols),
        "errors": [[num(r.error) if r else None for r in row] for row in table.errors],
        "orders": [[num(v) for v in row] for row in table.orders],
        "spatially_dominated": table.spatially_dominated.tolist(),
        "reference": _metadata(table, None)[5][1],
        "nu_dt": table.nu_dt,
        "predicted": _prediction_dict(table),
        "prediction_note": table.prediction_note,
        "failures": [vars(f) for f in table.failures],
    }
    if check is not None:
        doc["reproduction"] = {
            "name": check.name,
            "passed": check.passed,
            "cells": [
                {
                    "h_exp": c.h_exponent,
                    "tau_exp": c.tau_exponent,
                    "observed": num(c.observed),
                    "expected": c.expected,
                    "lo": c.lo,
                    "hi": c.hi,
                    "passed": c.passed,
                }
                for c in check.cells
            ],
        }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _as_csv(table: ConvergenceTable, check: Optional[ReproductionResult]) -> str:
    buf = io.StringIO()
    for key, value in _metadata(table, check):
        buf.write(f"# {key}={value}\n")
    for c in check.cells if check else ():
        buf.write(
            f"# check h_exp={c.h_exponent} tau_exp={c.tau_exponent} observed={_fmt_order(c.observed)} "
            f"expected={c.expected:.2f} range=[{c.lo:.2f},{c.hi:.2f}] {'PASS' if c.passed else 'FAIL'}\n"
        )
    for f in table.failures:
        buf.write(f"# failed h_exp={f.h_exponent} tau_exp={f.tau_exponent}: {f.message}\n")
    writer = csv.writer(buf, lineterminator="\n")
    buf.write("# errors\n")
    writer.writerow(["h_exp", *table.cols])
    for e, row in zip(table.rows, table.errors):
        writer.writerow([e, *(_fmt_err(r.error if r else None) for r in row)])
    buf.write("# orders\n")
    writer.writerow(["h_exp", *table.order_cols])
    for e, row in zip(table.rows, table.orders):
        writer.writerow([e, *(_fmt_order(v) for v in row[1:])])
    buf.write("# spatially_dominated\n")
    writer.writerow(["h_exp", *table.order_cols])
    for e, row in zip(table.rows, table.spatially_dominated):
        writer.writerow([e, *(int(v) for v in row[1:])])
    return buf.getvalue()


def _base(v: float) -> str:
    return f"{v:g}"


def _as_markdown(table: ConvergenceTable, check: Optional[ReproductionResult]) -> str:
    hdr = f"{_base(table.h_base)} h⁻¹ \\ {_base(table.tau_base)} τ⁻¹"
    lines = []
    p = table.predicted
    pred = f"p* = {p.describe()}" if p else f"no prediction ({table.prediction_note or 'n/a'})"
    lines.append(f"Observed temporal orders: {table.problem_label}, {table.tableau_label}, ν_dt = {table.nu_dt}, {pred}")
    lines.append("")
    lines.append("| " + " | ".join([hdr, *(f"2^{j}" for j in table.order_cols)]) + " |")
    lines.append("|" + "---|" * (len(table.order_cols) + 1))
    for e, row, flags in zip(table.rows, table.orders, table.spatially_dominated):
        cells = [_fmt_order(v, 2) + ("*" if fl else "") for v, fl in zip(row[1:], flags[1:])]
        lines.append("| " + " | ".join([f"2^{e}", *cells]) + " |")
    if table.spatially_dominated.any():
        lines.append("")
        lines.append("\\* error ratio below 2^0.2: spatial error dominates, order not meaningful")
    lines.append("")
    lines.append(f"Errors (discrete L2 at t_e, reference {_metadata(table, None)[5][1]})")
    lines.append("")
    lines.append("| " + " | ".join([hdr, *(f"2^{j}" for j in table.cols)]) + " |")
    lines.append("|" + "---|" * (len(table.cols) + 1))
    for e, row in zip(table.rows, table.errors):
        lines.append("| " + " | ".join([f"2^{e}", *(_fmt_err(r.error if r else None) for r in row)]) + " |")
    if check is not None:
        lines.append("")
        bad = [c for c in check.cells if not c.passed]
        lines.append(f"Reproduction {check.name}: {'PASS' if check.passed else 'FAIL'} "
                     f"({len(check.cells) - len(bad)}/{len(check.cells)} cells in range)")
        for c in bad:
            lines.append(f"- h 2^{c.h_exponent}, τ 2^{c.tau_exponent}: {_fmt_order(c.observed, 3)} "
                         f"not in [{c.lo:.2f}, {c.hi:.2f}]")
    return "\n".join(lines) + "\n"


def render_table(table: ConvergenceTable, fmt: str, check: Optional[ReproductionResult] = None) -> str:
    if fmt == "json":
        return _as_json(table, check)
    if fmt == "markdown":
        return _as_markdown(table, check)
    return _as_csv(table, check)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


_PROVENANCE = {
    BuiltinId.INDEX3_BTCS: "manufactured solution, index-3 example on (-1/2, 1/2)",
    BuiltinId.RADAU_INDEX1_INHOMOG: "manufactured solution, index-1 example, inhomogeneous boundary data",
    BuiltinId.RADAU_INDEX1_HOMOG4: "manufactured solution, index-1 example, boundary data with vanishing 4th time derivative",
    BuiltinId.COIL: "superconducting coil, parameters all 1, no exact solution",
}


def cmd_list(args) -> int:
    entries = []
    for bid in builtin_ids():
        p = builtin(bid)
        nu = differential_time_index(p, GridSpec.for_problem(p, 31)).nu_dt
        entries.append({"id": bid.value, "n": p.n, "nu_dt": nu, "exact": p.has_exact, "provenance": _PROVENANCE[bid]})
    fmt = args.format or "markdown"
    if fmt == "json":
        text = json.dumps(entries, indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(entries[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(entries)
        text = buf.getvalue()
    else:
        rows = ["| id | n | ν_dt | exact | provenance |", "|---|---|---|---|---|"]
        rows += [f"| {e['id']} | {e['n']} | {e['nu_dt']} | {'yes' if e['exact'] else 'no'} | {e['provenance']} |"
                 for e in entries]
        text = "\n".join(rows) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _problem_from_args(args):
    try:
        BuiltinId(args.problem)
    except ValueError:
        raise UsageError(f"unknown problem {args.problem!r}") from None
    coil = _coil_from({f"coil_{k}": getattr(args, f"coil_{k}") for k in COIL_KEYS})
    return builtin(args.problem, coil_params=coil)


def cmd_analyze(args) -> int:
    problem = _problem_from_args(args)
    if args.tableau not in TABLEAU_NAMES:
        raise UsageError(f"unknown tableau {args.tableau!r}")
    tab = by_name(args.tableau)
    if args.N < 1:
        raise UsageError("--N must be positive")
    grid = GridSpec.for_problem(problem, args.N, args.delta)
    try:
        report = differential_time_index(problem, grid, full=args.full_index_sweep)
    except IrregularPencil as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    hyp = check_hypotheses(tab, report.nu_dt)
    vanishing = bc_vanishing_for(problem, tab)
    try:
        pred = predict_order(tab, report.nu_dt, vanishing)
        note = ""
    except (HypothesisViolated, LookupError) as exc:
        pred, note = None, str(exc)
    doc = {
        "problem": problem.label,
        "n": problem.n,
        "N": grid.N,
        "h": grid.h,
        "delta": grid.delta,
        "tableau": tab.label,
        "modes_checked": len(report.per_mode),
        "pencil_regular": all(r.regular for r in report.per_mode),
        "nu_dt": report.nu_dt,
        "uniform": report.uniform,
        "hypotheses": hyp,
        "bc_vanishing": vanishing,
        "p_star": pred.p_star if pred else None,
        "p_nu": pred.p_nu if pred else None,
        "regime": pred.regime.value if pred else None,
        "epsilon_flag": pred.epsilon_flag if pred else None,
        "note": note,
    }
    if (args.format or "text") == "json":
        text = json.dumps(doc, indent=2) + "\n"
    else:
        yn = {True: "yes", False: "no", None: "not checked"}
        lines = [
            f"problem:        {problem.label} (n={problem.n})",
            f"grid:           N={grid.N}, h={grid.h:.6g}, delta={grid.delta}",
            f"tableau:        {tab.label} (s={tab.s}, p={tab.p}, q={tab.q})",
            f"pencil regular: {yn[doc['pencil_regular']]} ({doc['modes_checked']} modes checked)",
            f"nu_dt:          {report.nu_dt} ({'uniform' if report.uniform else 'not uniform'} across modes)",
            "hypotheses:",
            *(f"  {name}: {yn[ok]}" for name, ok in hyp.items()),
            f"boundary data q+1-th time derivative vanishes: {yn[vanishing]}",
        ]
        if pred:
            lines.append(
                f"predicted order: p_star={pred.p_star:g} (p_nu={pred.p_nu}, regime={pred.regime.value}, "
                f"epsilon_flag={'true' if pred.epsilon_flag else 'false'})"
            )
        else:
            lines.append(f"predicted order: unavailable ({note})")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK if pred else EXIT_FAIL


def _run_reproduction(name: str, fmt: str, out: Optional[str], jobs: Optional[int]) -> int:
    if name not in REPRODUCTIONS:
        raise UsageError(f"unknown reproduction {name!r}; choose from {', '.join(sorted(REPRODUCTIONS))}")
    from .convergence import reproduce

    result = reproduce(name, jobs=jobs)
    _emit(render_table(result.table, fmt, result), out)
    bad = sum(not c.passed for c in result.cells)
    status = "PASS" if result.passed else "FAIL"
    print(f"{name}: {status} ({len(result.cells) - bad}/{len(result.cells)} cells in range)", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_sweep(args) -> int:
    if args.reproduce:
        jobs = args.jobs if args.jobs is not None else _env_jobs()
        return _run_reproduction(args.reproduce, args.format or "csv", args.out, jobs)
    cfg = config_from_args(args)
    problem = builtin(cfg.problem, coil_params=cfg.coil)
    try:
        table = run_sweep(
            problem,
            by_name(cfg.tableau),
            cfg.h_exponents,
            cfg.tau_exponents,
            cfg.h_base,
            cfg.tau_base,
            delta=cfg.delta,
            reference=cfg.reference,
            jobs=cfg.jobs,
            full_index_sweep=cfg.full_index_sweep,
        )
    except ValueError as exc:
        # incompatible h or tau, or a reference the problem cannot provide
        raise UsageError(str(exc)) from None
    _emit(render_table(table, cfg.format), cfg.out)
    for f in table.failures:
        print(f"cell h_exp={f.h_exponent} tau_exp={f.tau_exponent} failed: {f.message}", file=sys.stderr)
    return EXIT_FAIL if table.failures else EXIT_OK


def cmd_reproduce(args) -> int:
    jobs = args.jobs if args.jobs is not None else _env_jobs()
    names = sorted(REPRODUCTIONS) if args.name == "all" else [args.name]
    codes = [_run_reproduction(n, args.format or "csv", args.out if len(names) == 1 else None, jobs) for n in names]
    return max(codes)


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_coil_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("coil parameters (default 1)")
    for k in COIL_KEYS:
        g.add_argument(f"--coil-{k}", dest=f"coil_{k}", type=float, default=None, metavar="X")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdae-lab", description="Linear PDAE solver, index analysis and convergence sweeps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    tableaus = sorted(TABLEAU_NAMES)
    problems = [b.value for b in builtin_ids()]

    p = sub.add_parser("list", help="list the built-in problems")
    p.add_argument("--format", choices=("markdown", "csv", "json"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("analyze", help="index analysis and predicted temporal order")
    p.add_argument("problem", nargs="?", choices=problems, metavar="PROBLEM")
    p.add_argument("tableau_pos", nargs="?", choices=tableaus, metavar="TABLEAU")
    p.add_argument("--problem", dest="problem_flag", choices=problems)
    p.add_argument("--tableau", dest="tableau_flag", choices=tableaus)
    p.add_argument("--N", type=int, default=31, help="interior grid points (default 31)")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--full-index-sweep", action="store_true", help="check every mode pencil")
    p.add_argument("--format", choices=("text", "json"))
    p.add_argument("--out")
    _add_coil_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="run an (h, tau) convergence sweep")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--reproduce", choices=sorted(REPRODUCTIONS), help="run a stored reproduction configuration")
    p.add_argument("--problem", choices=problems)
    p.add_argument("--tableau", choices=tableaus)
    p.add_argument("--h-base", dest="h_base", type=float)
    p.add_argument("--tau-base", dest="tau_base", type=float)
    p.add_argument("--h-exps", dest="h_exps", help="e.g. 2,3,4 or 2..4")
    p.add_argument("--tau-exps", dest="tau_exps", help="e.g. 1..7")
    p.add_argument("--delta", type=float)
    p.add_argument("--reference", choices=("auto", "exact", "fine_tau"))
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, help="worker threads (default $PDAE_LAB_JOBS or automatic)")
    p.add_argument("--full-index-sweep", dest="full_index_sweep", action="store_true")
    _add_coil_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a stored table and compare with its orders")
    p.add_argument("name", choices=[*sorted(REPRODUCTIONS), "all"])
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "analyze":
        args.problem = args.problem_flag or args.problem
        args.tableau = args.tableau_flag or args.tableau_pos or "radau3"
        if args.problem is None:
            print("pdae-lab analyze: error: a problem is required", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pdae-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError, IrregularPencil) as exc:
        print(f"pdae-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
